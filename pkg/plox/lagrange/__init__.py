"""Lagrangian mechanics in moving frames, under time-dependent constraints and in space-time.

**codeplox: Production grade, enterprise ready Python code**

Lagrangians are written as expressions, differentiated twice by forward mode automatic
differentiation and pulled back through moving frames and constraint immersions. Motions
are computed both from the Euler-Lagrange equations and as stationary points of a
discrete action, and every frame independence statement of the theory is available as a
numerical check through :mod:`plox.lagrange.verify` and the ``plox-lagrange`` command.
"""
