#include "bikebot/cli.hpp"

int main(int argc, char** argv) { return bikebot::cli::run(argc, argv); }
