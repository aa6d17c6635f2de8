"""Discrete-velocity two-species Vlasov-Maxwell-Boltzmann solver in
perturbation form, with the diagnostic harness for its structural
invariants (collision-operator null space and coercivity, macroscopic
cancellation, Maxwell constraints, energy ledger)."""

__version__ = "0.1.0"
