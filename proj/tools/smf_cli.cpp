#include "smf/apps/cli.hpp"

int main(int argc, char** argv) { return smf::apps::cli_main(argc, argv); }
