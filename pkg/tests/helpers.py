import numpy as np

from firecosim import solver
from firecosim.robot import RobotState, camera_for_robot
from firecosim.scenario import FireSource, Scenario, corner_sensors


def make_grid(n=24, voxel=0.25, ambient=293.0):
    return solver.FireGrid(
        dims=(n, n, n), voxel_size=voxel,
        velocity=np.zeros((n, n, n, 3)),
        temperature=np.full((n, n, n), ambient),
        species={k: np.zeros((n, n, n)) for k in solver.SPECIES},
        soot=np.zeros((n, n, n)),
        solid=np.zeros((n, n, n), dtype=bool),
    )


def cam(x=0.0, y=3.0, heading=0.0, w=20, h=16, height_m=3.0):
    return camera_for_robot(RobotState(x=x, y=y, heading=heading, speed=0, stamp=0),
                            width=w, height=h, height_m=height_m)


def no_depth(c):
    return np.full((c.height, c.width), np.inf)


def small_scenario(**kw):
    return Scenario(
        name="small",
        domain_size=(6.0, 6.0, 3.0),
        voxel_size=0.5,
        fires=(FireSource(center=(3.0, 3.0, 0.5), radius=0.5, heat_release_rate=25.0,
                          ignition_temperature=900.0),),
        sensors=corner_sensors(),
        robot_start=(1.0, 1.0),
        robot_goal=(5.0, 5.0),
        **kw,
    ).validate()
