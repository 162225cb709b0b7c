"""Python bindings for the bikebot toolkit."""

from ._bikebot import (  # noqa: F401
    BikebotParams,
    Pose,
    RobotModel,
    __version__,
    balance_torque,
    balance_torque_90,
    cli_main,
    default_model,
    equilibrium_roll,
    forward_kinematics,
    gravity_vector,
    mass_matrix,
    platform_only_model,
    roll_capability,
    steering_sensitivity,
    toy_model,
)
