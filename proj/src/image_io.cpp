#include <cmath>
#include <fstream>
#include <string>

#include "sarco/error.hpp"
#include "sarco/image.hpp"

namespace sarco {

void write_pgm(const std::filesystem::path& path, const Image<std::uint8_t>& img) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error(ErrorKind::kIo, "cannot write '" + path.string() + "'");
  out << "P5\n" << img.cols() << ' ' << img.rows() << "\n255\n";
  out.write(reinterpret_cast<const char*>(img.data()), static_cast<std::streamsize>(img.size()));
  if (!out) throw Error(ErrorKind::kIo, "failed writing '" + path.string() + "'");
}

Image<std::uint8_t> read_pgm(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorKind::kIo, "cannot open '" + path.string() + "'");
  std::string magic;
  Index cols = 0, rows = 0;
  int maxval = 0;
  in >> magic >> cols >> rows >> maxval;
  if (magic != "P5" || cols <= 0 || rows <= 0 || maxval != 255) {
    throw Error(ErrorKind::kFormat, "unsupported graymap '" + path.string() + "'");
  }
  in.get();
  Image<std::uint8_t> img(rows, cols);
  in.read(reinterpret_cast<char*>(img.data()), static_cast<std::streamsize>(img.size()));
  if (in.gcount() != img.size()) {
    throw Error(ErrorKind::kTruncation, "graymap payload too short in '" + path.string() + "'");
  }
  return img;
}

void write_pgm_signed8(const std::filesystem::path& path, const Image8& img) {
  write_pgm(path, (img.cast<int>() + 127).cast<std::uint8_t>());
}

}  // namespace sarco
