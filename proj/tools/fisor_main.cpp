#include "fisor/cli.hpp"

int main(int argc, char** argv) { return fisor::cli::run(argc, argv); }
