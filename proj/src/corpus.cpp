#include "smart/corpus.hpp"

#include "smart/errors.hpp"
#include "smart/image_io.hpp"

#include <algorithm>
#include <charconv>
#include <fstream>
#include <sstream>

namespace smart {

namespace fs = std::filesystem;

namespace {

std::vector<std::string> split_csv_line(std::string line) {
  if (!line.empty() && line.back() == '\r') line.pop_back();
  std::vector<std::string> out;
  std::string field;
  bool quoted = false;
  for (std::size_t i = 0; i < line.size(); ++i) {
    const char c = line[i];
    if (quoted) {
      if (c == '"' && i + 1 < line.size() && line[i + 1] == '"') {
        field += '"';
        ++i;
      } else if (c == '"') {
        quoted = false;
      } else {
        field += c;
      }
    } else if (c == '"') {
      quoted = true;
    } else if (c == ',') {
      out.push_back(std::move(field));
      field.clear();
    } else {
      field += c;
    }
  }
  out.push_back(std::move(field));
  return out;
}

template <class T>
T parse_number(const std::string& s, const std::string& where) {
  T v{};
  const auto [p, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  if (ec != std::errc{} || p != s.data() + s.size()) throw CorpusError(where + ": bad number '" + s + "'");
  return v;
}

SourceFrame load_frame(const fs::path& file, std::int64_t id, std::optional<SteeringAngle> gt) {
  try {
    return {id, std::make_shared<const RgbImage>(read_png_rgb(file)), gt};
  } catch (const ImageIoError& e) {
    throw CorpusError(file.string() + ": " + e.what());
  }
}

}  // namespace

std::vector<SourceFrame> load_corpus(const fs::path& dir) {
  if (!fs::is_directory(dir)) throw CorpusError("corpus directory not found: " + dir.string());
  std::vector<SourceFrame> frames;
  const fs::path index = dir / "frames.csv";
  if (fs::exists(index)) {
    std::ifstream in(index);
    std::string line;
    std::getline(in, line);
    const auto header = split_csv_line(line);
    if (header.size() < 2 || header[0] != "frame_id" || header[1] != "file")
      throw CorpusError(index.string() + ": header must start with frame_id,file");
    const bool has_gt = header.size() > 2 && header[2] == "ground_truth";
    std::size_t lineno = 1;
    while (std::getline(in, line)) {
      ++lineno;
      if (line.empty() || line == "\r") continue;
      const std::string where = index.string() + ":" + std::to_string(lineno);
      const auto f = split_csv_line(line);
      if (f.size() < 2) throw CorpusError(where + ": expected at least 2 fields");
      std::optional<SteeringAngle> gt;
      if (has_gt && f.size() > 2 && !f[2].empty()) {
        try {
          gt = SteeringAngle(parse_number<double>(f[2], where));
        } catch (const InvalidValue& e) {
          throw CorpusError(where + ": " + e.what());
        }
      }
      frames.push_back(load_frame(dir / f[1], parse_number<std::int64_t>(f[0], where), gt));
    }
  } else {
    std::vector<fs::path> files;
    for (const auto& e : fs::directory_iterator(dir))
      if (e.is_regular_file() && e.path().extension() == ".png") files.push_back(e.path());
    std::sort(files.begin(), files.end());
    for (std::size_t i = 0; i < files.size(); ++i)
      frames.push_back(load_frame(files[i], static_cast<std::int64_t>(i), std::nullopt));
  }
  std::sort(frames.begin(), frames.end(), [](const auto& a, const auto& b) { return a.frame_id < b.frame_id; });
  if (frames.empty()) throw CorpusEmpty("no frames in " + dir.string());
  validate_corpus(frames);
  return frames;
}

void save_corpus(const fs::path& dir, const std::vector<SourceFrame>& corpus) {
  fs::create_directories(dir);
  std::ostringstream csv;
  csv << "frame_id,file,ground_truth\r\n";
  for (const auto& f : corpus) {
    const std::string name = std::to_string(f.frame_id) + ".png";
    write_png(dir / name, *f.image);
    csv << f.frame_id << ',' << name << ',';
    if (f.ground_truth) {
      char buf[32];
      const auto r = std::to_chars(buf, buf + sizeof buf, f.ground_truth->value());
      csv.write(buf, r.ptr - buf);
    }
    csv << "\r\n";
  }
  std::ofstream(dir / "frames.csv", std::ios::binary) << csv.str();
}

}  // namespace smart
