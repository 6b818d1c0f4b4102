#include "motionstack/cli.hpp"

int main(int argc, char** argv) { return motionstack::cli::run(argc, argv); }
