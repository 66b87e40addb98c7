#include "msq/tensor_io.hpp"

#include <bit>
#include <charconv>
#include <cmath>
#include <cstring>
#include <fstream>
#include <sstream>

#include <nlohmann/json.hpp>

#include "msq/error.hpp"

namespace msq {

namespace {

void put_f32_le(std::string& out, float v) {
  const auto bits = std::bit_cast<std::uint32_t>(v);
  for (int i = 0; i < 4; ++i) out.push_back(static_cast<char>((bits >> (8 * i)) & 0xFFu));
}

float get_f32_le(const unsigned char* p) {
  std::uint32_t bits = 0;
  for (int i = 0; i < 4; ++i) bits |= static_cast<std::uint32_t>(p[i]) << (8 * i);
  return std::bit_cast<float>(bits);
}

}  // namespace

std::string encode_matrix(const Matrix2D& m) {
  nlohmann::ordered_json header = {
      {"rows", m.rows()}, {"cols", m.cols()}, {"dtype", "f32"}, {"byte_order", "little"}};
  const std::string h = header.dump();
  std::string out = std::to_string(h.size()) + "\n" + h;
  out.reserve(out.size() + 4 * m.size());
  for (double v : m.data()) put_f32_le(out, static_cast<float>(v));
  return out;
}

Matrix2D decode_matrix(std::string_view bytes) {
  const auto nl = bytes.find('\n');
  if (nl == std::string_view::npos || nl == 0 || nl > 16) {
    throw InputError("matrix file: missing header length line");
  }
  std::size_t header_len = 0;
  auto [ptr, ec] = std::from_chars(bytes.data(), bytes.data() + nl, header_len);
  if (ec != std::errc{} || ptr != bytes.data() + nl) {
    throw InputError("matrix file: header length is not a decimal integer");
  }
  if (nl + 1 + header_len > bytes.size()) throw InputError("matrix file: truncated header");

  nlohmann::json header;
  try {
    header = nlohmann::json::parse(bytes.substr(nl + 1, header_len));
  } catch (const nlohmann::json::exception& e) {
    throw InputError(std::string("matrix file: bad header JSON: ") + e.what());
  }
  std::size_t rows = 0, cols = 0;
  try {
    rows = header.at("rows").get<std::size_t>();
    cols = header.at("cols").get<std::size_t>();
    if (header.at("dtype").get<std::string>() != "f32")
      throw InputError("matrix file: dtype must be f32");
    if (header.at("byte_order").get<std::string>() != "little")
      throw InputError("matrix file: byte_order must be little");
  } catch (const nlohmann::json::exception& e) {
    throw InputError(std::string("matrix file: header field error: ") + e.what());
  }

  const std::size_t offset = nl + 1 + header_len;
  const std::size_t payload = bytes.size() - offset;
  if (rows != 0 && cols > payload / 4 / rows) throw InputError("matrix file: truncated payload");
  if (payload != rows * cols * 4) {
    throw InputError("matrix file: payload is " + std::to_string(payload) + " bytes, expected " +
                     std::to_string(rows * cols * 4));
  }
  std::vector<double> data(rows * cols);
  const auto* p = reinterpret_cast<const unsigned char*>(bytes.data() + offset);
  for (std::size_t i = 0; i < data.size(); ++i) {
    const float f = get_f32_le(p + 4 * i);
    if (!std::isfinite(f)) throw InputError("matrix file: non-finite value at index " + std::to_string(i));
    data[i] = f;
  }
  return Matrix2D(rows, cols, std::move(data));
}

std::string read_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw InputError("cannot open " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

Matrix2D read_matrix(const std::filesystem::path& path) {
  return decode_matrix(read_file(path));
}

void write_matrix(const std::filesystem::path& path, const Matrix2D& m) {
  write_file_atomic(path, encode_matrix(m));
}

void write_file_atomic(const std::filesystem::path& path, std::string_view contents) {
  auto tmp = path;
  tmp += ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw InputError("cannot write " + tmp.string());
    out.write(contents.data(), static_cast<std::streamsize>(contents.size()));
    if (!out) {
      out.close();
      std::filesystem::remove(tmp);
      throw InputError("write failed for " + tmp.string());
    }
  }
  std::filesystem::rename(tmp, path);
}

}  // namespace msq
