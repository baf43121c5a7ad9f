#include "joris/cli.hpp"

int main(int argc, char** argv) { return joris::cli::run(argc, argv); }
