#include <fmt/format.h>

#include <charconv>
#include <fstream>
#include <sstream>

#include "earsleep/error.hpp"
#include "earsleep/signal.hpp"
#include "text_io.hpp"

namespace earsleep::signal {

Recording parse_recording(std::string_view text) {
  io::LineReader lines(text);
  std::string_view line;
  if (!lines.next(line)) throw Error(ErrorKind::ParseError, "line 1: missing header `timestamp_ms,uV`");
  if (line != "timestamp_ms,uV")
    throw Error(ErrorKind::ParseError, fmt::format("line 1: expected header `timestamp_ms,uV`, got `{}`", line));

  Recording rec;
  while (lines.next(line)) {
    if (line.empty()) continue;
    auto fields = io::split(line, ',');
    if (fields.size() != 2)
      throw Error(ErrorKind::ParseError, fmt::format("line {}: expected 2 fields", lines.line_number()));
    rec.t_ms.push_back(io::parse_double(fields[0], lines.line_number()));
    rec.uv.push_back(io::parse_double(fields[1], lines.line_number()));
  }
  if (rec.t_ms.size() < 2)
    throw Error(ErrorKind::ParseError, "recording file holds fewer than 2 samples");
  for (std::size_t i = 1; i < rec.t_ms.size(); ++i)
    if (!(rec.t_ms[i] > rec.t_ms[i - 1]))
      throw Error(ErrorKind::ParseError,
                  fmt::format("line {}: timestamps must be strictly increasing", i + 2));
  return rec;
}

Hypnogram parse_hypnogram(std::string_view text) {
  io::LineReader lines(text);
  std::string_view line;
  if (!lines.next(line) || line != "start_ms,stage")
    throw Error(ErrorKind::ParseError, "line 1: expected header `start_ms,stage`");

  Hypnogram hyp;
  while (lines.next(line)) {
    if (line.empty()) continue;
    auto fields = io::split(line, ',');
    if (fields.size() != 2)
      throw Error(ErrorKind::ParseError, fmt::format("line {}: expected 2 fields", lines.line_number()));
    HypnogramEntry e;
    e.start_ms = io::parse_int(fields[0], lines.line_number());
    auto stage = parse_stage(fields[1]);
    if (!stage)
      throw Error(ErrorKind::ParseError,
                  fmt::format("line {}: unknown stage `{}`", lines.line_number(), fields[1]));
    e.stage = *stage;
    if (!hyp.entries.empty() && e.start_ms < hyp.entries.back().start_ms + kEpochMs)
      throw Error(ErrorKind::ParseError,
                  fmt::format("line {}: entry overlaps the previous 30 s epoch", lines.line_number()));
    hyp.entries.push_back(e);
  }
  if (hyp.entries.empty()) throw Error(ErrorKind::ParseError, "hypnogram file has no entries");
  return hyp;
}

Recording read_recording(const std::string& path) { return parse_recording(io::read_file(path)); }

Hypnogram read_hypnogram(const std::string& path) { return parse_hypnogram(io::read_file(path)); }

void write_recording(const std::string& path, const Recording& rec) {
  fmt::memory_buffer buf;
  fmt::format_to(std::back_inserter(buf), "timestamp_ms,uV\n");
  for (std::size_t i = 0; i < rec.size(); ++i)
    fmt::format_to(std::back_inserter(buf), "{:.3f},{:.4f}\n", rec.t_ms[i], rec.uv[i]);
  io::write_file(path, {buf.data(), buf.size()});
}

void write_hypnogram(const std::string& path, const Hypnogram& hyp) {
  fmt::memory_buffer buf;
  fmt::format_to(std::back_inserter(buf), "start_ms,stage\n");
  for (const auto& e : hyp.entries) fmt::format_to(std::back_inserter(buf), "{},{}\n", e.start_ms, to_string(e.stage));
  io::write_file(path, {buf.data(), buf.size()});
}

}  // namespace earsleep::signal
