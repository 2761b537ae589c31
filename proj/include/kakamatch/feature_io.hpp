#pragma once

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "kakamatch/error.hpp"
#include "kakamatch/sift.hpp"

namespace kakamatch {

// Feature cache format, one file per image:
//   SIFTv1 <count>
//   {"kp":[x,y,sigma,orientation,response],"d":[...128 values...]}
//   ...
// Values are printed with 9 significant digits, which round-trips float
// exactly.
inline std::string serialize_features(const std::vector<Feature>& features) {
  std::string out = "SIFTv1 " + std::to_string(features.size()) + "\n";
  char buf[32];
  auto append = [&out, &buf](double v) {
    std::snprintf(buf, sizeof(buf), "%.9g", v);
    out += buf;
  };
  for (const Feature& f : features) {
    out += "{\"kp\":[";
    append(f.keypoint.x);
    out += ',';
    append(f.keypoint.y);
    out += ',';
    append(f.keypoint.sigma);
    out += ',';
    append(f.keypoint.orientation);
    out += ',';
    append(f.keypoint.response);
    out += "],\"d\":[";
    for (std::size_t i = 0; i < f.descriptor.values.size(); ++i) {
      if (i) out += ',';
      append(f.descriptor.values[i]);
    }
    out += "]}\n";
  }
  return out;
}

inline std::vector<Feature> parse_features(const std::string& text, const std::string& origin = "") {
  const std::string where = origin.empty() ? "feature data" : origin;
  std::size_t pos = text.find('\n');
  if (pos == std::string::npos) throw DecodeError(where + ": missing header line");
  const std::string header = text.substr(0, pos);
  if (header.rfind("SIFTv1 ", 0) != 0) throw DecodeError(where + ": bad header '" + header + "'");
  std::size_t count = 0;
  try {
    count = std::stoul(header.substr(7));
  } catch (const std::exception&) {
    throw DecodeError(where + ": bad feature count in header '" + header + "'");
  }

  std::vector<Feature> features;
  features.reserve(count);
  std::size_t line_start = pos + 1;
  while (line_start < text.size()) {
    std::size_t line_end = text.find('\n', line_start);
    if (line_end == std::string::npos) line_end = text.size();
    if (line_end > line_start) {
      nlohmann::json rec = nlohmann::json::parse(text.substr(line_start, line_end - line_start),
                                                 nullptr, false);
      if (rec.is_discarded() || !rec.contains("kp") || !rec.contains("d") || rec["kp"].size() != 5 ||
          rec["d"].size() != 128) {
        throw DecodeError(where + ": malformed feature record at offset " + std::to_string(line_start));
      }
      Feature f;
      f.keypoint.x = rec["kp"][0].get<float>();
      f.keypoint.y = rec["kp"][1].get<float>();
      f.keypoint.sigma = rec["kp"][2].get<float>();
      f.keypoint.orientation = rec["kp"][3].get<float>();
      f.keypoint.response = rec["kp"][4].get<float>();
      for (std::size_t i = 0; i < 128; ++i) f.descriptor.values[i] = rec["d"][i].get<float>();
      features.push_back(std::move(f));
    }
    line_start = line_end + 1;
  }
  if (features.size() != count) {
    throw DecodeError(where + ": header count " + std::to_string(count) + " != records " +
                      std::to_string(features.size()));
  }
  return features;
}

inline void save_features(const std::filesystem::path& path, const std::vector<Feature>& features) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot open " + path.string() + " for writing");
  const std::string text = serialize_features(features);
  out.write(text.data(), static_cast<std::streamsize>(text.size()));
  if (!out) throw IoError("short write to " + path.string());
}

inline std::vector<Feature> load_features(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open " + path.string());
  std::string text((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  return parse_features(text, path.string());
}

}  // namespace kakamatch
