#pragma once

// On-disk datasets. One directory per split:
//   manifest.txt     one line per sample: <file> <modality> <d0>x<d1> <label|->
//   NNNNNN.f32       raw little-endian float32, row-major
// Image samples are raw power spectrograms (bins x frames); IQ samples are
// antennas x 2T interleaved streams. Stats files hold one line
// `mean=<v> std=<v> min=<v> max=<v>`.

#include "mmwfm/samples.hpp"

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

namespace mmwfm {

namespace fs = std::filesystem;

struct ManifestEntry {
  std::string file;
  Modality modality = Modality::Image;
  int rows = 0;
  int cols = 0;
  std::optional<int> label;
};

inline Modality parse_modality(const std::string& tag) {
  if (tag == "image") return Modality::Image;
  if (tag == "iq") return Modality::IQ;
  throw ConfigError("unknown modality tag '" + tag + "'");
}

inline void write_f32(const fs::path& path, const Mat<double>& m) {
  std::vector<float> buf(std::size_t(m.size()));
  for (Eigen::Index i = 0; i < m.size(); ++i) buf[std::size_t(i)] = float(m.data()[i]);
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError("cannot write " + path.string());
  out.write(reinterpret_cast<const char*>(buf.data()), std::streamsize(buf.size() * sizeof(float)));
  if (!out) throw IoError("short write to " + path.string());
}

inline Mat<double> read_f32(const fs::path& path, int rows, int cols) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot read " + path.string());
  std::vector<float> buf(std::size_t(rows) * std::size_t(cols));
  in.read(reinterpret_cast<char*>(buf.data()), std::streamsize(buf.size() * sizeof(float)));
  if (in.gcount() != std::streamsize(buf.size() * sizeof(float)) || in.peek() != std::char_traits<char>::eof())
    throw IoError(path.string() + ": size does not match manifest shape " + shape_str(rows, cols));
  Mat<double> m(rows, cols);
  for (std::size_t i = 0; i < buf.size(); ++i) m.data()[i] = buf[i];
  return m;
}

class DatasetWriter {
 public:
  explicit DatasetWriter(fs::path dir) : dir_(std::move(dir)) {
    std::error_code ec;
    fs::create_directories(dir_, ec);
    if (ec) throw IoError("cannot create " + dir_.string() + ": " + ec.message());
  }

  void add(const RawSpectrogram& s, std::optional<int> label = {}) { add(Modality::Image, s.power, label); }
  void add(const IQSample<double>& s, std::optional<int> label = {}) { add(Modality::IQ, s.data, label); }

  void finish() const {
    std::ofstream out(dir_ / "manifest.txt", std::ios::trunc);
    if (!out) throw IoError("cannot write " + (dir_ / "manifest.txt").string());
    for (const auto& e : entries_) {
      out << e.file << ' ' << modality_tag(e.modality) << ' ' << e.rows << 'x' << e.cols << ' ';
      if (e.label) out << *e.label;
      else out << '-';
      out << '\n';
    }
  }

  std::size_t size() const { return entries_.size(); }

 private:
  void add(Modality m, const Mat<double>& data, std::optional<int> label) {
    char name[32];
    std::snprintf(name, sizeof(name), "%06zu.f32", entries_.size());
    write_f32(dir_ / name, data);
    entries_.push_back({name, m, int(data.rows()), int(data.cols()), label});
  }

  fs::path dir_;
  std::vector<ManifestEntry> entries_;
};

inline std::vector<ManifestEntry> read_manifest(const fs::path& dir) {
  std::ifstream in(dir / "manifest.txt");
  if (!in) throw IoError("no manifest in " + dir.string());
  std::vector<ManifestEntry> out;
  std::string line;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty() || line[0] == '#') continue;
    std::istringstream ss(line);
    std::string file, tag, shape, label;
    if (!(ss >> file >> tag >> shape >> label))
      throw IoError((dir / "manifest.txt").string() + ":" + std::to_string(lineno) + ": expected 4 fields");
    ManifestEntry e;
    e.file = file;
    e.modality = parse_modality(tag);
    const auto x = shape.find('x');
    try {
      if (x == std::string::npos) throw std::invalid_argument("shape");
      e.rows = std::stoi(shape.substr(0, x));
      e.cols = std::stoi(shape.substr(x + 1));
      if (label != "-") e.label = std::stoi(label);
    } catch (const std::logic_error&) {
      throw IoError((dir / "manifest.txt").string() + ":" + std::to_string(lineno) + ": malformed entry");
    }
    out.push_back(e);
  }
  return out;
}

struct LoadedDataset {
  std::vector<RawSpectrogram> spectrograms;
  std::vector<IQSample<double>> iq;
  std::vector<int> spectrogram_labels;  // -1 when unlabeled
  std::vector<int> iq_labels;
};

inline LoadedDataset load_dataset(const fs::path& dir) {
  LoadedDataset d;
  for (const auto& e : read_manifest(dir)) {
    Mat<double> m = read_f32(dir / e.file, e.rows, e.cols);
    if (e.modality == Modality::Image) {
      d.spectrograms.push_back(RawSpectrogram{std::move(m), 0.0, 0.0});
      d.spectrogram_labels.push_back(e.label.value_or(-1));
    } else {
      d.iq.push_back(IQSample<double>{std::move(m)});
      d.iq_labels.push_back(e.label.value_or(-1));
    }
  }
  return d;
}

inline void write_stats(const fs::path& path, const DatasetStats& s) {
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw IoError("cannot write " + path.string());
  out << std::setprecision(17) << "mean=" << s.mean << " std=" << s.std << " min=" << s.min << " max=" << s.max << '\n';
}

inline DatasetStats read_stats(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot read " + path.string());
  DatasetStats s;
  int seen = 0;
  std::string field;
  while (in >> field) {
    const auto eq = field.find('=');
    if (eq == std::string::npos) throw IoError(path.string() + ": malformed field '" + field + "'");
    const std::string key = field.substr(0, eq);
    double v;
    try {
      v = std::stod(field.substr(eq + 1));
    } catch (const std::logic_error&) {
      throw IoError(path.string() + ": bad value in '" + field + "'");
    }
    if (key == "mean") s.mean = v;
    else if (key == "std") s.std = v;
    else if (key == "min") s.min = v;
    else if (key == "max") s.max = v;
    else throw IoError(path.string() + ": unknown field '" + key + "'");
    ++seen;
  }
  if (seen != 4) throw IoError(path.string() + ": expected 4 fields, found " + std::to_string(seen));
  return s;
}

}  // namespace mmwfm
