#include "aftermath/cli.hpp"

int main(int argc, char** argv) { return aftermath::cli::run(argc, argv); }
