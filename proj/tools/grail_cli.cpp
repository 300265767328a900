#include "grail/cli.hpp"

int main(int argc, char** argv) { return grail::cli::main(argc, argv); }
