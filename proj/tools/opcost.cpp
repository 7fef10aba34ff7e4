#include "opcost_cli.hpp"

int main(int argc, char** argv) { return opcost::cli::run(argc, argv); }
