// Regenerates the committed synthetic fixture images.
//   make_fixtures <output-dir>

#include <filesystem>
#include <iostream>

#include "opguide/fixtures.hpp"
#include "opguide/io.hpp"

int main(int argc, char** argv) {
  if (argc != 2) {
    std::cerr << "usage: make_fixtures <output-dir>\n";
    return 1;
  }
  const std::filesystem::path dir(argv[1]);
  std::filesystem::create_directories(dir);
  const auto flash = opguide::fixtures::flash_noflash_scene();
  opguide::save_image(flash.guide, (dir / "flash_guide.ppm").string());
  opguide::save_image(flash.truth, (dir / "noflash_truth.ppm").string());
  const auto depth = opguide::fixtures::depth_rgb_scene();
  opguide::save_image(depth.guide, (dir / "depth_guide.ppm").string());
  opguide::save_image(depth.truth, (dir / "depth_truth.pgm").string(), 16);
  std::cout << "wrote fixtures to " << dir << '\n';
  return 0;
}
