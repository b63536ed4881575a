"""
epbabs - Rear-wheel anti-lock braking for an integrated electric parking brake.

Plant models (vehicle, Magic Formula tyre, electromechanical brake actuator),
a sliding-mode load-torque observer, a mu-slip friction estimator and cascaded
sliding-mode controllers with a PID baseline, plus scenario and metrics tooling.
"""

__version__ = '0.1.0'
