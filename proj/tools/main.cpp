#include "anchorfit/cli.hpp"

int main(int argc, char** argv) {
  return anchorfit::cli_dispatch(argc, argv);
}
