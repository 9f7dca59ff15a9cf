#include "walker/csv.hpp"

#include <charconv>
#include <cstdio>
#include <fstream>
#include <sstream>

namespace walker {

const std::vector<std::string> kRawChannelNames = {
    "accel_x", "accel_y", "accel_z", "load_fl", "load_fr",
    "load_rl", "load_rr", "encoder"};

namespace {

std::vector<std::string> split_csv_line(const std::string& line) {
  std::vector<std::string> fields;
  std::string cur;
  for (char c : line) {
    if (c == ',') {
      fields.push_back(cur);
      cur.clear();
    } else if (c != '\r') {
      cur.push_back(c);
    }
  }
  fields.push_back(cur);
  return fields;
}

long parse_int(const std::string& s, int line_no) {
  long v = 0;
  auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  if (ec != std::errc() || ptr != s.data() + s.size()) {
    throw DataError("line " + std::to_string(line_no) +
                    ": not an integer: '" + s + "'");
  }
  return v;
}

double parse_double(const std::string& s, int line_no) {
  try {
    size_t pos = 0;
    double v = std::stod(s, &pos);
    if (pos != s.size()) throw std::invalid_argument(s);
    return v;
  } catch (const std::exception&) {
    throw DataError("line " + std::to_string(line_no) + ": not a number: '" +
                    s + "'");
  }
}

std::ifstream open_or_throw(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open file: " + path.string());
  return in;
}

}  // namespace

void atomic_write(const std::filesystem::path& path, const std::string& body) {
  std::filesystem::path tmp = path;
  tmp += ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw DataError("cannot write file: " + tmp.string());
    out << body;
  }
  std::filesystem::rename(tmp, path);
}

RawSequence load_raw_csv(const std::filesystem::path& path,
                         const LabelSet& label_set) {
  std::ifstream in = open_or_throw(path);
  std::string line;
  if (!std::getline(in, line)) throw DataError("empty file: " + path.string());

  std::vector<std::string> header = split_csv_line(line);
  std::vector<std::string> expected = {"t"};
  expected.insert(expected.end(), kRawChannelNames.begin(),
                  kRawChannelNames.end());
  bool has_label = header.size() == expected.size() + 1 &&
                   header.back() == "label";
  size_t ncols = expected.size() + (has_label ? 1 : 0);
  if (header.size() != ncols) {
    throw DataError(path.string() + ": header does not match canonical layout");
  }
  for (size_t i = 0; i < expected.size(); ++i) {
    if (header[i] != expected[i]) {
      throw DataError(path.string() + ": header column " + std::to_string(i) +
                      " is '" + header[i] + "', expected '" + expected[i] + "'");
    }
  }

  RawSequence seq;
  seq.participant_id = path.stem().string();
  if (has_label) seq.labels.emplace();
  int line_no = 1;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    std::vector<std::string> fields = split_csv_line(line);
    if (fields.size() != ncols) {
      throw DataError("line " + std::to_string(line_no) + ": expected " +
                      std::to_string(ncols) + " fields, got " +
                      std::to_string(fields.size()));
    }
    SensorFrame frame;
    frame.tick = parse_int(fields[0], line_no);
    frame.channels.reserve(kRawChannelCount);
    for (int k = 0; k < kRawChannelCount; ++k) {
      long v = parse_int(fields[k + 1], line_no);
      if (v < 0 || v > kMaxSensorValue) {
        throw DataError("line " + std::to_string(line_no) + ": value " +
                        std::to_string(v) + " out of range [0, 65535]");
      }
      frame.channels.push_back(static_cast<int>(v));
    }
    seq.frames.push_back(std::move(frame));
    if (has_label) {
      Behaviour b = behaviour_from_string(fields.back());
      if (!label_set.contains(b)) {
        throw DataError("line " + std::to_string(line_no) + ": label " +
                        to_string(b) + " not in declared label set");
      }
      seq.labels->push_back(b);
    }
  }
  seq.validate();
  return seq;
}

void save_raw_csv(const RawSequence& seq, const std::filesystem::path& path) {
  std::ostringstream out;
  out << "t";
  for (const auto& name : kRawChannelNames) out << "," << name;
  if (seq.labels) out << ",label";
  out << "\n";
  for (size_t t = 0; t < seq.frames.size(); ++t) {
    out << seq.frames[t].tick;
    for (int v : seq.frames[t].channels) out << "," << v;
    if (seq.labels) out << "," << to_string((*seq.labels)[t]);
    out << "\n";
  }
  atomic_write(path, out.str());
}

FeatureSequence load_feature_csv(const std::filesystem::path& path,
                                 const LabelSet& label_set) {
  std::ifstream in = open_or_throw(path);
  std::string line;
  if (!std::getline(in, line)) throw DataError("empty file: " + path.string());

  std::vector<std::string> header = split_csv_line(line);
  if (header.size() < 2 || header[0] != "t") {
    throw DataError(path.string() + ": feature CSV header must start with 't'");
  }
  bool has_label = header.back() == "label";
  size_t n = header.size() - 1 - (has_label ? 1 : 0);
  if (n == 0) throw DataError(path.string() + ": no feature columns");

  FeatureSequence seq;
  seq.participant_id = path.stem().string();
  seq.feature_names.assign(header.begin() + 1, header.begin() + 1 + n);
  if (has_label) seq.labels.emplace();
  int line_no = 1;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    std::vector<std::string> fields = split_csv_line(line);
    if (fields.size() != header.size()) {
      throw DataError("line " + std::to_string(line_no) + ": expected " +
                      std::to_string(header.size()) + " fields, got " +
                      std::to_string(fields.size()));
    }
    std::vector<double> row;
    row.reserve(n);
    for (size_t k = 0; k < n; ++k) {
      row.push_back(parse_double(fields[k + 1], line_no));
    }
    seq.values.push_back(std::move(row));
    if (has_label) {
      Behaviour b = behaviour_from_string(fields.back());
      if (!label_set.contains(b)) {
        throw DataError("line " + std::to_string(line_no) + ": label " +
                        to_string(b) + " not in declared label set");
      }
      seq.labels->push_back(b);
    }
  }
  seq.validate();
  return seq;
}

void save_feature_csv(const FeatureSequence& seq,
                      const std::filesystem::path& path) {
  std::ostringstream out;
  out << "t";
  for (const auto& name : seq.feature_names) out << "," << name;
  if (seq.labels) out << ",label";
  out << "\n";
  char buf[64];
  for (int t = 0; t < seq.length(); ++t) {
    out << t;
    for (double v : seq.values[t]) {
      std::snprintf(buf, sizeof(buf), "%.17g", v);
      out << "," << buf;
    }
    if (seq.labels) out << "," << to_string((*seq.labels)[t]);
    out << "\n";
  }
  atomic_write(path, out.str());
}

std::vector<Behaviour> load_label_csv(const std::filesystem::path& path,
                                      const LabelSet& label_set) {
  std::ifstream in = open_or_throw(path);
  std::string line;
  if (!std::getline(in, line)) throw DataError("empty file: " + path.string());
  std::vector<std::string> header = split_csv_line(line);
  if (header.size() != 2 || header[0] != "t" || header[1] != "label") {
    throw DataError(path.string() + ": expected header 't,label'");
  }
  std::vector<Behaviour> labels;
  int line_no = 1;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    std::vector<std::string> fields = split_csv_line(line);
    if (fields.size() != 2) {
      throw DataError("line " + std::to_string(line_no) + ": expected 2 fields");
    }
    Behaviour b = behaviour_from_string(fields[1]);
    if (!label_set.contains(b)) {
      throw DataError("line " + std::to_string(line_no) + ": label " +
                      to_string(b) + " not in declared label set");
    }
    labels.push_back(b);
  }
  return labels;
}

void save_label_csv(const std::vector<Behaviour>& labels,
                    const std::filesystem::path& path) {
  std::ostringstream out;
  out << "t,label\n";
  for (size_t t = 0; t < labels.size(); ++t) {
    out << t << "," << to_string(labels[t]) << "\n";
  }
  atomic_write(path, out.str());
}

}  // namespace walker
