"""Fire co-simulation: a voxel fire/radiation simulator coupled to a kinematic
robot simulator over a non-blocking latest-value bus.

Subpackages and modules map to the major subsystems: scenario loading,
the gas-phase solver, particle radiation transport, the thermal costmap,
weighted A* planning, reactive control, behavioral cloning, the message
bridge, the robot simulator, and volumetric fire rendering.
"""

__version__ = "0.1.0"
