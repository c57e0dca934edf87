#include "trafficgp/cli.hpp"

int main(int argc, char** argv) { return trafficgp::cli::run(argc, argv); }
