"""Contact-coverage-guided exploration for RL agents.

The package tracks how often each finger has touched each region of an
object, conditioned on a hashed cluster of the object's state, and turns
those counts into exploration bonuses: a count-based reward on contact
and a decaying energy field that pulls fingers toward rarely-touched
regions before contact. A 2D push-box environment and a small PPO
trainer exercise the whole pipeline end to end.
"""

__version__ = "0.1.0"
