#include "steadytube/cli.hpp"

int main(int argc, char** argv) { return steadytube::cli::run(argc, argv); }
