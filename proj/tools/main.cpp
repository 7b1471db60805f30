#include "dpss/cli.hpp"

int main(int argc, char** argv) { return dpss::cli::run(argc, argv); }
