#include "shiftup/cli.hpp"

int main(int argc, char** argv) { return shiftup::cli::run(argc, argv); }
