#include "cadsim/cli.hpp"

int main(int argc, char** argv) { return cadsim::cli::run(argc, argv); }
