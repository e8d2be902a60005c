// Writes a procedural digit dataset in IDX format, for running the pipeline
// without downloading anything.

#include <iostream>
#include <string>

#include <CLI11.hpp>

#include "spikegen/synthetic.hpp"

int main(int argc, char** argv) {
  CLI::App app{"Generate a synthetic digit dataset in IDX format"};
  std::string images = "digits-images-idx3-ubyte";
  std::string labels = "digits-labels-idx1-ubyte";
  int count = 10000;
  int size = 28;
  uint64_t seed = 1;
  app.add_option("--images", images, "output image file");
  app.add_option("--labels", labels, "output label file");
  app.add_option("--count", count, "number of images");
  app.add_option("--size", size, "image side length");
  app.add_option("--seed", seed, "generator seed");
  CLI11_PARSE(app, argc, argv);
  try {
    spikegen::write_synthetic_digit_dataset(images, labels, count, size, seed);
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  std::cout << "wrote " << count << " images to " << images << "\n";
  return 0;
}
