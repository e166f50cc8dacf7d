#include "pwinv/cli.hpp"

int main(int argc, char** argv) { return pwinv::cli::main(argc, argv); }
