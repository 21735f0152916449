// Regenerates the bundled synthetic price CSV (fixed seed, byte-stable).
#include <fstream>
#include <iostream>

#include "storarb/synthetic.hpp"

int main(int argc, char** argv) {
  if (argc != 2) {
    std::cerr << "usage: make_synthetic OUTPUT.csv\n";
    return 1;
  }
  std::ofstream out(argv[1], std::ios::binary);
  storarb::write_price_csv(out, storarb::generate_synthetic(storarb::default_synthetic_options()));
  if (!out) {
    std::cerr << "cannot write " << argv[1] << '\n';
    return 2;
  }
  return 0;
}
