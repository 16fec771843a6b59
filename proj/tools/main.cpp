#include "taildep/cli.hpp"

int main(int argc, char** argv) { return taildep::run_command(argc, argv); }
