"""flexlink: simulation and control of serial flexible-link manipulators.

Layers
------
``screw``       body-fixed twist/wrench algebra
``beam``        slender-link modal models (clamped-free bases, stiffness, energy)
``dynamics``    per-link operators, joint constraints, constrained stepping
``reference``   endpoint trajectories and constraint-consistent desired twists
``control``     nominal/adaptive twist-space controllers, passive and PD baselines
``adaptation``  parameter projection, regressors, residuals, excitation metrics
``monitors``    runtime stability certificates (decay envelopes, power residuals)
``simulate``    scenario orchestration and CSV/JSON logging
``cli``         command-line entry point (``flexlink run|validate``)
"""

__version__ = "0.1.0"
