#include "metalens/io.hpp"

#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <sstream>

namespace metalens::io {

bool Sections::has(const std::string& sec, const std::string& key) const {
  auto s = data.find(sec);
  return s != data.end() && s->second.count(key) > 0;
}

std::string Sections::get(const std::string& sec, const std::string& key) const {
  auto s = data.find(sec);
  if (s == data.end() || !s->second.count(key))
    throw ConfigError(origin + ": missing required field [" + sec + "] " + key);
  return s->second.at(key).first;
}

std::string Sections::get_or(const std::string& sec, const std::string& key,
                             const std::string& fallback) const {
  return has(sec, key) ? data.at(sec).at(key).first : fallback;
}

double Sections::to_num(const std::string& sec, const std::string& key,
                        const std::string& v) const {
  char* end = nullptr;
  const double x = std::strtod(v.c_str(), &end);
  if (end == v.c_str() || *end != '\0')
    throw ConfigError(origin + ": field [" + sec + "] " + key +
                      " is not a number: '" + v + "'");
  return x;
}

double Sections::get_num(const std::string& sec, const std::string& key) const {
  return to_num(sec, key, get(sec, key));
}

double Sections::get_num_or(const std::string& sec, const std::string& key,
                            double fallback) const {
  if (!has(sec, key)) return fallback;
  return to_num(sec, key, data.at(sec).at(key).first);
}

namespace {

std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string::npos) return "";
  const auto e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

}  // namespace

Sections parse_sections_text(const std::string& text,
                             const std::string& origin) {
  Sections out;
  out.origin = origin;
  std::istringstream in(text);
  std::string line, section;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    const auto hash = line.find('#');
    if (hash != std::string::npos) line = line.substr(0, hash);
    line = trim(line);
    if (line.empty()) continue;
    if (line.front() == '[') {
      if (line.back() != ']')
        throw ConfigError(origin + ":" + std::to_string(lineno) +
                          ": malformed section header");
      section = trim(line.substr(1, line.size() - 2));
      continue;
    }
    const auto eq = line.find('=');
    if (eq == std::string::npos)
      throw ConfigError(origin + ":" + std::to_string(lineno) +
                        ": expected 'key = value'");
    if (section.empty())
      throw ConfigError(origin + ":" + std::to_string(lineno) +
                        ": key outside any [section]");
    const std::string key = trim(line.substr(0, eq));
    const std::string value = trim(line.substr(eq + 1));
    if (key.empty() || value.empty())
      throw ConfigError(origin + ":" + std::to_string(lineno) +
                        ": empty key or value");
    out.data[section][key] = {value, lineno};
  }
  return out;
}

Sections parse_sections_file(const std::string& path) {
  return parse_sections_text(read_file(path), path);
}

std::string fmt(double v) {
  char buf[40];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

std::uint64_t fnv1a64(const std::string& bytes) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : bytes) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  return h;
}

std::string read_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error("cannot open file: " + path);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

std::string file_hash_hex(const std::string& path) {
  char buf[20];
  std::snprintf(buf, sizeof(buf), "%016llx",
                static_cast<unsigned long long>(fnv1a64(read_file(path))));
  return buf;
}

namespace {

std::string phase_header(const PhaseField& pf) {
  std::string h = "# phase surface=";
  h += pf.surface == SurfaceId::S1 ? "S1" : "S2";
  h += " nx=" + std::to_string(pf.grid.nx) + " ny=" + std::to_string(pf.grid.ny);
  h += " bounds=" + fmt(pf.grid.x_min) + "," + fmt(pf.grid.x_max) + "," +
       fmt(pf.grid.y_min) + "," + fmt(pf.grid.y_max);
  return h + "\n";
}

}  // namespace

void write_phase_scalar_csv(const std::string& path, const PhaseField& pf) {
  std::ofstream out(path);
  if (!out) throw Error("cannot write " + path);
  out << phase_header(pf);
  for (int iy = 0; iy < pf.grid.ny; ++iy) {
    for (int ix = 0; ix < pf.grid.nx; ++ix)
      out << fmt(pf.scalar(pf.grid.index(ix, iy)))
          << (ix + 1 < pf.grid.nx ? "," : "\n");
  }
}

void write_phase_grad_csv(const std::string& path, const PhaseField& pf) {
  std::ofstream out(path);
  if (!out) throw Error("cannot write " + path);
  out << phase_header(pf);
  for (int i = 0; i < pf.grid.size(); ++i)
    out << fmt(pf.grad2(i, 0)) << "," << fmt(pf.grad2(i, 1)) << "\n";
}

PhaseField read_phase_grad_csv(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw Error("cannot open " + path);
  std::string header;
  std::getline(in, header);
  char surf[8];
  int nx = 0, ny = 0;
  double x0 = 0, x1 = 0, y0 = 0, y1 = 0;
  if (std::sscanf(header.c_str(),
                  "# phase surface=%7s nx=%d ny=%d bounds=%lf,%lf,%lf,%lf",
                  surf, &nx, &ny, &x0, &x1, &y0, &y1) != 7)
    throw Error("phase csv: bad header in " + path);
  PhaseField pf;
  pf.surface = std::string(surf) == "S2" ? SurfaceId::S2 : SurfaceId::S1;
  pf.grid = Grid2::uniform(nx, ny, x0, x1, y0, y1);
  pf.grad2.resize(pf.grid.size(), 2);
  std::string line;
  int i = 0;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    if (i >= pf.grid.size()) throw Error("phase csv: too many rows in " + path);
    double gx = 0, gy = 0;
    if (std::sscanf(line.c_str(), "%lf,%lf", &gx, &gy) != 2)
      throw Error("phase csv: bad row in " + path);
    pf.grad2(i, 0) = gx;
    pf.grad2(i, 1) = gy;
    ++i;
  }
  if (i != pf.grid.size()) throw Error("phase csv: too few rows in " + path);
  return pf;
}

}  // namespace metalens::io
