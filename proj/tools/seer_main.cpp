#include "seer/cli.hpp"

int main(int argc, char** argv) { return seer::cli::run(argc, argv); }
