#include "graphmpa/cli.hpp"

int main(int argc, char** argv) { return graphmpa::run_cli(argc, argv); }
