#include "bridgekit/cli.hpp"

int main(int argc, char** argv) { return bridgekit::cli::run_command(argc, argv); }
