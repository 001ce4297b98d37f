#include "angle_i2p/correspondence_io.hpp"

#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <sstream>
#include <vector>

namespace angle_i2p {
namespace {

std::vector<std::string> split_fields(const std::string& line) {
  std::vector<std::string> fields;
  std::istringstream ss(line);
  std::string token;
  while (ss >> token) fields.push_back(token);
  return fields;
}

double parse_real(const std::string& token, std::size_t line_no) {
  const char* begin = token.c_str();
  char* end = nullptr;
  const double value = std::strtod(begin, &end);
  if (end == begin || *end != '\0' || !std::isfinite(value)) {
    throw DomainError("line " + std::to_string(line_no) + ": bad real '" + token + "'");
  }
  return value;
}

}  // namespace

std::string format_real(double value) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%.17g", value);
  return buf;
}

void write_correspondences(std::ostream& out, const CorrespondenceSet& corrs) {
  corrs.validate();
  const auto& k = corrs.intrinsics;
  out << "K " << format_real(k.fx) << ' ' << format_real(k.fy) << ' ' << format_real(k.cx) << ' '
      << format_real(k.cy) << ' ' << format_real(k.width) << ' ' << format_real(k.height) << '\n';
  if (corrs.gt_pose) {
    out << "POSE";
    for (int r = 0; r < 3; ++r)
      for (int c = 0; c < 3; ++c) out << ' ' << format_real(corrs.gt_pose->rotation(r, c));
    for (int r = 0; r < 3; ++r) out << ' ' << format_real(corrs.gt_pose->translation(r));
    out << '\n';
  }
  for (std::size_t i = 0; i < corrs.size(); ++i) {
    const auto& c = corrs.items[i];
    out << format_real(c.pixel.u) << ' ' << format_real(c.pixel.v) << ' '
        << format_real(c.point.x()) << ' ' << format_real(c.point.y()) << ' '
        << format_real(c.point.z()) << ' ' << format_real(c.est_depth) << ' '
        << format_real(c.est_point.x()) << ' ' << format_real(c.est_point.y()) << ' '
        << format_real(c.est_point.z());
    if (corrs.gt_labels) out << ' ' << ((*corrs.gt_labels)[i] ? 1 : 0);
    out << '\n';
  }
}

CorrespondenceSet read_correspondences(std::istream& in) {
  CorrespondenceSet corrs;
  std::string line;
  std::size_t line_no = 0;
  bool have_header = false;
  std::vector<bool> labels;
  bool labelled = false;
  while (std::getline(in, line)) {
    ++line_no;
    const auto fields = split_fields(line);
    if (fields.empty()) continue;
    if (!have_header) {
      if (fields.size() != 7 || fields[0] != "K") {
        throw DomainError("line " + std::to_string(line_no) + ": expected 'K fx fy cx cy width height'");
      }
      auto& k = corrs.intrinsics;
      k.fx = parse_real(fields[1], line_no);
      k.fy = parse_real(fields[2], line_no);
      k.cx = parse_real(fields[3], line_no);
      k.cy = parse_real(fields[4], line_no);
      k.width = parse_real(fields[5], line_no);
      k.height = parse_real(fields[6], line_no);
      k.validate();
      have_header = true;
      continue;
    }
    if (fields[0] == "POSE") {
      if (corrs.gt_pose || !corrs.items.empty() || fields.size() != 13) {
        throw DomainError("line " + std::to_string(line_no) + ": malformed or misplaced POSE line");
      }
      Pose pose;
      for (int r = 0; r < 3; ++r)
        for (int c = 0; c < 3; ++c) pose.rotation(r, c) = parse_real(fields[1 + 3 * r + c], line_no);
      for (int r = 0; r < 3; ++r) pose.translation(r) = parse_real(fields[10 + r], line_no);
      corrs.gt_pose = pose;
      continue;
    }
    if (fields.size() != 9 && fields.size() != 10) {
      throw DomainError("line " + std::to_string(line_no) + ": expected 9 or 10 fields, got " +
                        std::to_string(fields.size()));
    }
    const bool has_label = fields.size() == 10;
    if (corrs.items.empty()) {
      labelled = has_label;
    } else if (has_label != labelled) {
      throw DomainError("line " + std::to_string(line_no) + ": labels must be on every record or none");
    }
    Correspondence c;
    c.pixel = {parse_real(fields[0], line_no), parse_real(fields[1], line_no)};
    c.point = {parse_real(fields[2], line_no), parse_real(fields[3], line_no),
               parse_real(fields[4], line_no)};
    c.est_depth = parse_real(fields[5], line_no);
    c.est_point = {parse_real(fields[6], line_no), parse_real(fields[7], line_no),
                   parse_real(fields[8], line_no)};
    if (!(c.est_depth > 0.0)) {
      throw DomainError("line " + std::to_string(line_no) + ": est depth must be positive");
    }
    if (has_label) {
      if (fields[9] != "0" && fields[9] != "1") {
        throw DomainError("line " + std::to_string(line_no) + ": label must be 0 or 1");
      }
      labels.push_back(fields[9] == "1");
    }
    corrs.items.push_back(c);
  }
  if (!have_header) throw DomainError("correspondence file has no 'K' header line");
  if (labelled) corrs.gt_labels = std::move(labels);
  return corrs;
}

void save_correspondences(const std::filesystem::path& path, const CorrespondenceSet& corrs) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot open " + path.string() + " for writing");
  write_correspondences(out, corrs);
  if (!out) throw std::runtime_error("write failed: " + path.string());
}

CorrespondenceSet load_correspondences(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot open " + path.string());
  return read_correspondences(in);
}

}  // namespace angle_i2p
