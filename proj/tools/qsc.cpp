#include "qsc/cli.hpp"

int main(int argc, char** argv) { return qsc::cli::run(argc, argv); }
