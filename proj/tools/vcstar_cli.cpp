#include "vcstar/cli.hpp"

int main(int argc, char** argv) { return vcstar::cli::run(argc, argv); }
