// Regenerates the bundled rig data file: gen_rig18 <output.json>
#include "anchorfit/io.hpp"
#include "anchorfit/synthetic.hpp"

#include <cstdio>

int main(int argc, char** argv) {
  if (argc != 2) {
    std::fprintf(stderr, "usage: gen_rig18 <output.json>\n");
    return 1;
  }
  anchorfit::io::save_rig(argv[1], anchorfit::default_rig());
  return 0;
}
