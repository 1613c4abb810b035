#include "gwshm/signal_io.hpp"

#include <charconv>
#include <cmath>
#include <fstream>
#include <string_view>
#include <system_error>
#include <vector>

#include "gwshm/error.hpp"

namespace gwshm {

namespace fs = std::filesystem;

void write_text_atomic(const fs::path& path, const std::string& content) {
  const fs::path dir = path.has_parent_path() ? path.parent_path() : fs::path(".");
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec) throw DataError("cannot create directory " + dir.string() + ": " + ec.message());

  const fs::path tmp = path.string() + ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw DataError("cannot open " + tmp.string() + " for writing");
    out.write(content.data(), static_cast<std::streamsize>(content.size()));
    out.flush();
    if (!out) throw DataError("write failed for " + tmp.string());
  }
  fs::rename(tmp, path, ec);
  if (ec) throw DataError("cannot rename " + tmp.string() + " to " + path.string() +
                          ": " + ec.message());
}

std::string format_double(double value) {
  char buf[64];
  const auto res = std::to_chars(buf, buf + sizeof(buf), value);
  return std::string(buf, res.ptr);
}

namespace {

double parse_double(std::string_view text, const std::string& where) {
  double value = 0.0;
  const char* first = text.data();
  const char* last = text.data() + text.size();
  // Tolerate surrounding spaces from hand-edited files.
  while (first < last && (*first == ' ' || *first == '\t')) ++first;
  while (last > first && (last[-1] == ' ' || last[-1] == '\t')) --last;
  const auto res = std::from_chars(first, last, value);
  if (res.ec != std::errc() || res.ptr != last)
    throw DataError(where + ": cannot parse number '" + std::string(text) + "'");
  return value;
}

long parse_long(std::string_view text, const std::string& where) {
  long value = 0;
  const char* first = text.data();
  const char* last = text.data() + text.size();
  while (first < last && (*first == ' ' || *first == '\t')) ++first;
  while (last > first && (last[-1] == ' ' || last[-1] == '\t')) --last;
  const auto res = std::from_chars(first, last, value);
  if (res.ec != std::errc() || res.ptr != last)
    throw DataError(where + ": cannot parse integer '" + std::string(text) + "'");
  return value;
}

/// Splits one CSV line into fields, honoring double-quoted fields with the
/// doubled-quote escape.  No multi-line fields (records are single-line).
std::vector<std::string> split_csv_line(const std::string& line,
                                        const std::string& where) {
  std::vector<std::string> fields;
  std::string field;
  bool quoted = false;
  for (std::size_t i = 0; i < line.size(); ++i) {
    const char c = line[i];
    if (quoted) {
      if (c == '"') {
        if (i + 1 < line.size() && line[i + 1] == '"') {
          field.push_back('"');
          ++i;
        } else {
          quoted = false;
        }
      } else {
        field.push_back(c);
      }
    } else if (c == '"') {
      quoted = true;
    } else if (c == ',') {
      fields.push_back(std::move(field));
      field.clear();
    } else if (c != '\r') {
      field.push_back(c);
    }
  }
  if (quoted) throw DataError(where + ": unterminated quote");
  fields.push_back(std::move(field));
  return fields;
}

}  // namespace

SignalEnsemble ingest_csv(const fs::path& file, const CsvSchema& schema) {
  std::ifstream in(file);
  if (!in) throw DataError("cannot open " + file.string());

  std::string line;
  if (!std::getline(in, line)) throw DataError(file.string() + ": empty file");
  const std::vector<std::string> header = split_csv_line(line, file.string() + " header");

  const auto column = [&](const std::string& name) {
    for (std::size_t i = 0; i < header.size(); ++i)
      if (header[i] == name) return i;
    throw DataError(file.string() + ": missing column '" + name + "'");
  };
  const std::size_t c_path = column(schema.path_id);
  const std::size_t c_state = column(schema.state_label);
  const std::size_t c_real = column(schema.realization_index);
  const std::size_t c_rate = column(schema.sample_rate);
  const std::size_t c_samples = column(schema.samples);

  std::vector<SignalRecord> records;
  for (long row = 2; std::getline(in, line); ++row) {
    if (line.empty() || line == "\r") continue;
    const std::string where = file.string() + " row " + std::to_string(row);
    const std::vector<std::string> fields = split_csv_line(line, where);
    const auto field = [&](std::size_t i) -> const std::string& {
      if (i >= fields.size())
        throw DataError(where + ": expected at least " + std::to_string(i + 1) +
                        " fields, got " + std::to_string(fields.size()));
      return fields[i];
    };

    SignalRecord rec;
    rec.path_id = field(c_path);
    rec.state_label = field(c_state);
    rec.realization_index = static_cast<int>(parse_long(field(c_real), where));
    rec.sample_rate = parse_double(field(c_rate), where);

    const std::string& blob = field(c_samples);
    std::size_t start = 0;
    std::size_t sample_index = 0;
    while (start <= blob.size()) {
      std::size_t end = blob.find(';', start);
      if (end == std::string::npos) end = blob.size();
      const std::string_view one(blob.data() + start, end - start);
      if (!one.empty() || end != blob.size()) {
        rec.samples.push_back(parse_double(
            one, where + " sample index " + std::to_string(sample_index)));
        ++sample_index;
      }
      if (end == blob.size()) break;
      start = end + 1;
    }

    const std::size_t n = rec.samples.size();
    for (std::size_t i = 0; i < n; ++i) {
      if (!std::isfinite(rec.samples[i]))
        throw DataError(where + ": non-finite sample at index " + std::to_string(i));
    }
    if (rec.samples.empty()) throw DataError(where + ": no samples");
    if (!(rec.sample_rate > 0.0) || !std::isfinite(rec.sample_rate))
      throw DataError(where + ": sample rate must be positive and finite");
    records.push_back(std::move(rec));
  }

  if (records.empty()) throw DataError(file.string() + ": no records");

  // Cross-record checks with row context: from_records would catch these,
  // but here the row number is still known.
  const std::size_t length = records.front().samples.size();
  const double rate = records.front().sample_rate;
  for (std::size_t i = 0; i < records.size(); ++i) {
    const std::string where = file.string() + " row " + std::to_string(i + 2);
    if (records[i].samples.size() != length)
      throw DataError(where + ": record length " +
                      std::to_string(records[i].samples.size()) +
                      " differs from first record length " + std::to_string(length));
    if (records[i].sample_rate != rate)
      throw DataError(where + ": inconsistent sample_rate");
  }
  return SignalEnsemble::from_records(std::move(records));
}

void write_ensemble_csv(const SignalEnsemble& ensemble, const fs::path& file) {
  std::string out;
  out.reserve(ensemble.records.size() * (ensemble.record_length() * 10 + 64));
  out += "path_id,state_label,realization_index,sample_rate,samples\n";
  for (const auto& rec : ensemble.records) {
    out += rec.path_id;
    out += ',';
    out += rec.state_label;
    out += ',';
    out += std::to_string(rec.realization_index);
    out += ',';
    out += format_double(rec.sample_rate);
    out += ",\"";
    for (std::size_t i = 0; i < rec.samples.size(); ++i) {
      if (i) out += ';';
      out += format_double(rec.samples[i]);
    }
    out += "\"\n";
  }
  write_text_atomic(file, out);
}

void write_spectrogram_csv(const Spectrogram& spec, const fs::path& file) {
  std::string out;
  out += "time_s";
  for (const double f : spec.frequencies) {
    out += ',';
    out += format_double(f);
  }
  out += '\n';
  for (Eigen::Index r = 0; r < spec.magnitude.rows(); ++r) {
    out += format_double(spec.times[static_cast<std::size_t>(r)]);
    for (Eigen::Index c = 0; c < spec.magnitude.cols(); ++c) {
      out += ',';
      out += format_double(spec.magnitude(r, c));
    }
    out += '\n';
  }
  write_text_atomic(file, out);
}

}  // namespace gwshm
