#include "mweforge/checkpoint.hpp"

#include <cerrno>
#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <sstream>
#include <stdexcept>

namespace mweforge {

namespace {

constexpr const char* kMagic = "mweforge-checkpoint";

[[noreturn]] void fail(std::size_t line, const std::string& what) {
  throw std::runtime_error("checkpoint line " + std::to_string(line) + ": " + what);
}

std::string hex(double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%a", v);
  return buf;
}

double parse_hex(const std::string& s, std::size_t line) {
  errno = 0;
  char* end = nullptr;
  const double v = std::strtod(s.c_str(), &end);
  if (end == s.c_str() || *end != '\0' || errno == ERANGE) fail(line, "bad value '" + s + "'");
  return v;
}

bool bitwise_equal(const ad::Matrix& a, const ad::Matrix& b) {
  if (a.rows() != b.rows() || a.cols() != b.cols()) return false;
  for (Eigen::Index i = 0; i < a.size(); ++i)
    if (hex(a(i)) != hex(b(i))) return false;
  return true;
}

}  // namespace

const std::string& Checkpoint::meta_value(const std::string& key) const {
  for (const auto& [k, v] : meta)
    if (k == key) return v;
  throw std::out_of_range("checkpoint has no meta '" + key + "'");
}

const std::vector<std::string>& Checkpoint::list(const std::string& name) const {
  for (const auto& [k, v] : lists)
    if (k == name) return v;
  throw std::out_of_range("checkpoint has no list '" + name + "'");
}

const ad::Matrix& Checkpoint::tensor(const std::string& name) const {
  for (const auto& [k, v] : tensors)
    if (k == name) return v;
  throw std::out_of_range("checkpoint has no tensor '" + name + "'");
}

bool Checkpoint::operator==(const Checkpoint& other) const {
  if (meta != other.meta || lists != other.lists || tensors.size() != other.tensors.size()) return false;
  for (std::size_t i = 0; i < tensors.size(); ++i)
    if (tensors[i].first != other.tensors[i].first || !bitwise_equal(tensors[i].second, other.tensors[i].second)) return false;
  return true;
}

void write_checkpoint(const Checkpoint& checkpoint, std::ostream& out) {
  out << kMagic << ' ' << Checkpoint::kVersion << '\n';
  for (const auto& [key, value] : checkpoint.meta) out << "meta " << key << ' ' << value << '\n';
  for (const auto& [name, items] : checkpoint.lists) {
    out << "list " << name << ' ' << items.size() << '\n';
    for (const auto& item : items) out << item << '\n';
  }
  for (const auto& [name, m] : checkpoint.tensors) {
    out << "tensor " << name << ' ' << m.rows() << ' ' << m.cols() << '\n';
    for (Eigen::Index r = 0; r < m.rows(); ++r) {
      for (Eigen::Index c = 0; c < m.cols(); ++c) out << (c ? " " : "") << hex(m(r, c));
      out << '\n';
    }
  }
  out << "end\n";
}

std::string write_checkpoint(const Checkpoint& checkpoint) {
  std::ostringstream os;
  write_checkpoint(checkpoint, os);
  return os.str();
}

Checkpoint read_checkpoint(std::istream& in) {
  Checkpoint cp;
  std::string line;
  std::size_t line_no = 0;
  auto next = [&]() -> std::string& {
    if (!std::getline(in, line)) fail(line_no, "unexpected end of file");
    ++line_no;
    return line;
  };

  {
    std::istringstream header(next());
    std::string magic;
    int version = 0;
    header >> magic >> version;
    if (magic != kMagic) fail(line_no, "not a checkpoint");
    if (version != Checkpoint::kVersion) fail(line_no, "unsupported version " + std::to_string(version));
  }

  while (true) {
    const std::string current = next();
    if (current == "end") break;
    const auto space = current.find(' ');
    const std::string kind = current.substr(0, space);
    const std::string rest = space == std::string::npos ? "" : current.substr(space + 1);
    if (kind == "meta") {
      const auto sep = rest.find(' ');
      cp.meta.emplace_back(rest.substr(0, sep), sep == std::string::npos ? "" : rest.substr(sep + 1));
    } else if (kind == "list") {
      std::istringstream ss(rest);
      std::string name;
      std::size_t count = 0;
      if (!(ss >> name >> count)) fail(line_no, "bad list header");
      std::vector<std::string> items;
      items.reserve(count);
      for (std::size_t i = 0; i < count; ++i) items.push_back(next());
      cp.lists.emplace_back(std::move(name), std::move(items));
    } else if (kind == "tensor") {
      std::istringstream ss(rest);
      std::string name;
      Eigen::Index rows = 0, cols = 0;
      if (!(ss >> name >> rows >> cols) || rows < 0 || cols < 0) fail(line_no, "bad tensor header");
      ad::Matrix m(rows, cols);
      for (Eigen::Index r = 0; r < rows; ++r) {
        std::istringstream values(next());
        for (Eigen::Index c = 0; c < cols; ++c) {
          std::string token;
          if (!(values >> token)) fail(line_no, "tensor " + name + " row too short");
          m(r, c) = parse_hex(token, line_no);
        }
      }
      cp.tensors.emplace_back(std::move(name), std::move(m));
    } else {
      fail(line_no, "unknown record '" + kind + "'");
    }
  }
  return cp;
}

void save_checkpoint(const Checkpoint& checkpoint, const std::string& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot write " + path);
  write_checkpoint(checkpoint, out);
}

Checkpoint load_checkpoint(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot open " + path);
  return read_checkpoint(in);
}

}  // namespace mweforge
