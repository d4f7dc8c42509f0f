"""uqengine: uncertainty quantification engine.

Modules: ``distributions`` (marginals, copulas, joints), ``transformations``
(Nataf, correlate/decorrelate), ``sampling`` (static designs and MCMC),
``model_runner`` (in-process and external template models), ``reliability``
(FORM, SORM, subset simulation), ``surrogates`` (GPR, PCE), ``sensitivity``
(Morris, Sobol, Chatterjee, Cramer-von Mises, PCE) and ``cli``.
"""

__version__ = "0.1.0"
