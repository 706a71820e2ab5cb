#pragma once

#include <cstdint>
#include <map>
#include <string>
#include <utility>

#include "metalens/errors.hpp"
#include "metalens/phase.hpp"

namespace metalens::io {

/// Sectioned key-value text: [section] headers, key = value, '#' comments.
struct Sections {
  std::map<std::string, std::map<std::string, std::pair<std::string, int>>>
      data;
  std::string origin;

  bool has_section(const std::string& sec) const { return data.count(sec) > 0; }
  bool has(const std::string& sec, const std::string& key) const;
  std::string get(const std::string& sec, const std::string& key) const;
  std::string get_or(const std::string& sec, const std::string& key,
                     const std::string& fallback) const;
  double get_num(const std::string& sec, const std::string& key) const;
  double get_num_or(const std::string& sec, const std::string& key,
                    double fallback) const;
  double to_num(const std::string& sec, const std::string& key,
                const std::string& value) const;
};

Sections parse_sections_text(const std::string& text,
                             const std::string& origin);
Sections parse_sections_file(const std::string& path);

/// Shortest round-trip decimal rendering of a double (deterministic output).
std::string fmt(double v);

std::uint64_t fnv1a64(const std::string& bytes);
std::string file_hash_hex(const std::string& path);
std::string read_file(const std::string& path);

/// Scalar phase file: '# phase surface=<S1|S2> nx= ny= bounds=x0,x1,y0,y1'
/// header, then ny rows of nx comma-separated values.
void write_phase_scalar_csv(const std::string& path, const PhaseField& pf);
/// Companion gradient file: same header, then one 'gx,gy' line per node.
void write_phase_grad_csv(const std::string& path, const PhaseField& pf);
/// Reads a gradient file back into a PhaseField (grad3/scalar left empty).
PhaseField read_phase_grad_csv(const std::string& path);

}  // namespace metalens::io
