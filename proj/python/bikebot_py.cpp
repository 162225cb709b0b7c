#include <pybind11/eigen.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include <string>
#include <vector>

#include "bikebot/bem.hpp"
#include "bikebot/cli.hpp"
#include "bikebot/dynamics.hpp"
#include "bikebot/kinematics.hpp"
#include "bikebot/planner.hpp"
#include "bikebot/steering.hpp"

namespace py = pybind11;
using namespace bikebot;

namespace {

int cli_main(const std::vector<std::string>& args) {
  std::vector<std::string> owned{"bikebot"};
  owned.insert(owned.end(), args.begin(), args.end());
  std::vector<char*> argv;
  for (auto& a : owned) argv.push_back(a.data());
  return cli::run(static_cast<int>(argv.size()), argv.data());
}

}  // namespace

PYBIND11_MODULE(_bikebot, m) {
  m.doc() = "Bikebot balance, planning and control toolkit";
  m.attr("__version__") = cli::kVersion;

  py::class_<BikebotParams>(m, "BikebotParams")
      .def(py::init<>())
      .def_readwrite("m_b", &BikebotParams::m_b)
      .def_readwrite("I_b", &BikebotParams::I_b)
      .def_readwrite("h_G", &BikebotParams::h_G)
      .def_readwrite("l", &BikebotParams::l)
      .def_readwrite("epsilon", &BikebotParams::epsilon)
      .def_readwrite("R", &BikebotParams::R)
      .def_readwrite("g", &BikebotParams::g);

  py::class_<Pose>(m, "Pose")
      .def(py::init<>())
      .def_readwrite("position", &Pose::position)
      .def_readwrite("orientation", &Pose::orientation, "Z-Y-X Euler angles (yaw, pitch, roll), rad")
      .def("vector", &Pose::vector);

  py::class_<RobotModel>(m, "RobotModel")
      .def_readonly("bike", &RobotModel::bike)
      .def_readonly("home", &RobotModel::home)
      .def("dof", &RobotModel::dof)
      .def("num_links", &RobotModel::num_links)
      .def("total_mass", &RobotModel::total_mass)
      .def("home_q", &RobotModel::home_q);

  m.def("default_model", &default_model);
  m.def("platform_only_model", &platform_only_model);
  m.def("toy_model", &toy_model);

  m.def("steering_sensitivity", &steering::steering_sensitivity, py::arg("phi0"), py::arg("params"),
        "dtau/ddelta at delta = 0 (N m/rad)");
  m.def("balance_torque_90", &steering::balance_torque_90, py::arg("delta"), py::arg("mass"),
        py::arg("params"));
  m.def("balance_torque", &steering::balance_torque, py::arg("delta"), py::arg("phi0"),
        py::arg("phi_b"), py::arg("mass"), py::arg("params"));

  m.def(
      "forward_kinematics", [](const RobotModel& model, const Vec& q) {
        return forward_kinematics(model, q).pose;
      },
      py::arg("model"), py::arg("q"));
  m.def("mass_matrix", &mass_matrix, py::arg("model"), py::arg("q"));
  m.def("gravity_vector", &gravity_vector, py::arg("model"), py::arg("q"), py::arg("delta") = 0.0);

  m.def(
      "equilibrium_roll",
      [](const RobotModel& model, const Vec& theta, double delta) -> py::object {
        const auto r = bem::solve_equilibrium_roll(model, theta, delta);
        if (!r.found) return py::none();
        return py::float_(r.point.q[0]);
      },
      py::arg("model"), py::arg("theta"), py::arg("delta"),
      "Equilibrium roll (rad) for a fixed arm posture and steering, or None");

  m.def(
      "roll_capability",
      [](const RobotModel& model, const std::string& strategy, double delta_range) {
        bem::Strategy s;
        if (strategy == "one_wheel") {
          s = bem::Strategy::OneWheel;
        } else if (strategy == "two_wheel") {
          s = bem::Strategy::TwoWheel;
        } else if (strategy == "two_wheel_arm") {
          s = bem::Strategy::TwoWheelArm;
        } else {
          throw py::value_error("strategy must be one_wheel, two_wheel or two_wheel_arm");
        }
        bem::CapabilityOptions opt;
        opt.delta_range = delta_range;
        return bem::max_roll_capability(model, s, opt).phi_b_max;
      },
      py::arg("model"), py::arg("strategy"), py::arg("delta_range") = 0.872664625997165,
      "Largest symmetric roll (rad) the strategy can hold");

  m.def("cli_main", &cli_main, py::arg("args"),
        "Runs the command-line tool with the given arguments and returns its exit code");
}
