#pragma once

#include <charconv>
#include <cstdint>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <optional>
#include <span>
#include <sstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "den/common.hpp"
#include "den/dataset.hpp"
#include "den/disparity.hpp"
#include "den/stats.hpp"
#include "den/synth.hpp"

namespace den {

using json = nlohmann::json;

/// On-disk description of a dataset bundle. Paths are relative to the
/// manifest's directory. Records either carry an `error` column or a
/// `prediction`/`label` pair plus `task`.
struct Manifest {
  std::size_t n = 0;
  std::size_t d = 0;
  std::string records;
  std::string embeddings;
  std::string embeddings_format = "denb";  // "denb" or "csv"
  std::optional<std::string> identity;     // records column name
  std::vector<std::string> groups;         // records column names
  std::optional<std::string> task;         // "regression" or "binary"
};

struct Bundle {
  Dataset dataset;
  Manifest manifest;
  std::filesystem::path manifest_path;
  std::string digest;  // content hash of records + embeddings bytes
  // Present when the records carried prediction/label columns.
  std::optional<ModelRun> run;
};

namespace detail {

inline std::string read_file_bytes(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot open " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return std::move(ss).str();
}

inline void write_file_bytes(const std::filesystem::path& path,
                             std::string_view bytes) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw DataError("cannot write " + path.string());
  out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
  if (!out) throw DataError("short write to " + path.string());
}

inline std::string hex_u64(std::uint64_t v) {
  static const char* digits = "0123456789abcdef";
  std::string out(16, '0');
  for (int i = 15; i >= 0; --i) {
    out[static_cast<std::size_t>(i)] = digits[v & 0xF];
    v >>= 4;
  }
  return out;
}

template <typename T>
std::string format_number(T value) {
  char buf[64];
  const auto res = std::to_chars(buf, buf + sizeof buf, value);
  return std::string(buf, res.ptr);
}

template <typename T>
T parse_number(std::string_view text, const std::string& where) {
  T value{};
  const char* first = text.data();
  const char* last = text.data() + text.size();
  const auto res = std::from_chars(first, last, value);
  if (res.ec != std::errc{} || res.ptr != last)
    throw DataError(where + ": cannot parse number from '" +
                    std::string(text) + "'");
  return value;
}

inline std::vector<std::string_view> split_csv_line(std::string_view line) {
  std::vector<std::string_view> fields;
  std::size_t start = 0;
  while (true) {
    const std::size_t comma = line.find(',', start);
    if (comma == std::string_view::npos) {
      fields.push_back(line.substr(start));
      break;
    }
    fields.push_back(line.substr(start, comma - start));
    start = comma + 1;
  }
  return fields;
}

// u32 little-endian regardless of host order
inline void put_u32le(std::string& out, std::uint32_t v) {
  out.push_back(static_cast<char>(v & 0xFF));
  out.push_back(static_cast<char>((v >> 8) & 0xFF));
  out.push_back(static_cast<char>((v >> 16) & 0xFF));
  out.push_back(static_cast<char>((v >> 24) & 0xFF));
}

inline std::uint32_t get_u32le(const unsigned char* p) {
  return static_cast<std::uint32_t>(p[0]) |
         (static_cast<std::uint32_t>(p[1]) << 8) |
         (static_cast<std::uint32_t>(p[2]) << 16) |
         (static_cast<std::uint32_t>(p[3]) << 24);
}

}  // namespace detail

constexpr char kDenbMagic[4] = {'D', 'E', 'N', 'B'};

/// Binary embedding matrix: magic "DENB", u32le n, u32le d, then n*d
/// IEEE-754 float32 little-endian values in row-major order.
inline std::string encode_denb(std::span<const float> values, std::size_t n,
                               std::size_t d) {
  if (values.size() != n * d)
    throw std::invalid_argument("denb: values do not match n*d");
  std::string out;
  out.reserve(12 + values.size() * 4);
  out.append(kDenbMagic, 4);
  detail::put_u32le(out, static_cast<std::uint32_t>(n));
  detail::put_u32le(out, static_cast<std::uint32_t>(d));
  for (float f : values) {
    std::uint32_t bits;
    std::memcpy(&bits, &f, 4);
    detail::put_u32le(out, bits);
  }
  return out;
}

inline std::vector<float> decode_denb(std::string_view bytes,
                                      const std::string& where,
                                      std::size_t* n_out, std::size_t* d_out) {
  if (bytes.size() < 12)
    throw DataError(where + ": truncated header (need 12 bytes, got " +
                    std::to_string(bytes.size()) + ")");
  if (std::memcmp(bytes.data(), kDenbMagic, 4) != 0)
    throw DataError(where + ": bad magic, expected \"DENB\"");
  const auto* p = reinterpret_cast<const unsigned char*>(bytes.data());
  const std::size_t n = detail::get_u32le(p + 4);
  const std::size_t d = detail::get_u32le(p + 8);
  if (bytes.size() != 12 + n * d * 4)
    throw DataError(where + ": expected " + std::to_string(12 + n * d * 4) +
                    " bytes for " + std::to_string(n) + "x" +
                    std::to_string(d) + " matrix, got " +
                    std::to_string(bytes.size()));
  std::vector<float> values(n * d);
  for (std::size_t i = 0; i < values.size(); ++i) {
    const std::uint32_t bits = detail::get_u32le(p + 12 + i * 4);
    std::memcpy(&values[i], &bits, 4);
  }
  *n_out = n;
  *d_out = d;
  return values;
}

namespace detail {

inline std::vector<float> parse_embeddings_csv(const std::string& text,
                                               const std::string& where,
                                               std::size_t n, std::size_t d) {
  std::vector<float> values;
  values.reserve(n * d);
  std::size_t line_no = 0;
  std::size_t pos = 0;
  while (pos < text.size()) {
    std::size_t end = text.find('\n', pos);
    if (end == std::string::npos) end = text.size();
    std::string_view line(text.data() + pos, end - pos);
    if (!line.empty() && line.back() == '\r') line.remove_suffix(1);
    pos = end + 1;
    if (line.empty()) continue;
    ++line_no;
    const auto fields = split_csv_line(line);
    if (fields.size() != d)
      throw DataError(where + ":" + std::to_string(line_no) + ": expected " +
                      std::to_string(d) + " columns, got " +
                      std::to_string(fields.size()));
    for (const auto f : fields)
      values.push_back(parse_number<float>(
          f, where + ":" + std::to_string(line_no)));
  }
  if (line_no != n)
    throw DataError(where + ": expected " + std::to_string(n) +
                    " embedding rows, got " + std::to_string(line_no));
  return values;
}

struct RecordsTable {
  std::vector<std::string> header;
  std::vector<std::vector<std::string>> rows;
};

inline RecordsTable parse_records_csv(const std::string& text,
                                      const std::string& where) {
  RecordsTable table;
  std::size_t pos = 0;
  std::size_t line_no = 0;
  while (pos < text.size()) {
    std::size_t end = text.find('\n', pos);
    if (end == std::string::npos) end = text.size();
    std::string_view line(text.data() + pos, end - pos);
    if (!line.empty() && line.back() == '\r') line.remove_suffix(1);
    pos = end + 1;
    if (line.empty()) continue;
    ++line_no;
    const auto fields = split_csv_line(line);
    if (line_no == 1) {
      for (const auto f : fields) table.header.emplace_back(f);
      continue;
    }
    if (fields.size() != table.header.size())
      throw DataError(where + ":" + std::to_string(line_no) + ": expected " +
                      std::to_string(table.header.size()) +
                      " columns, got " + std::to_string(fields.size()));
    std::vector<std::string> row;
    row.reserve(fields.size());
    for (const auto f : fields) row.emplace_back(f);
    table.rows.push_back(std::move(row));
  }
  if (table.header.empty())
    throw DataError(where + ": missing header row");
  return table;
}

inline std::size_t column_index(const RecordsTable& table,
                                const std::string& name,
                                const std::string& where) {
  for (std::size_t c = 0; c < table.header.size(); ++c)
    if (table.header[c] == name) return c;
  throw DataError(where + ": missing required column '" + name + "'");
}

inline Manifest manifest_from_json(const json& j, const std::string& where) {
  Manifest m;
  try {
    if (!j.contains("den_bundle") || j.at("den_bundle").get<int>() != 1)
      throw DataError(where + ": not a den bundle manifest (den_bundle != 1)");
    m.n = j.at("n").get<std::size_t>();
    m.d = j.at("d").get<std::size_t>();
    m.records = j.at("records").get<std::string>();
    m.embeddings = j.at("embeddings").get<std::string>();
    if (j.contains("embeddings_format"))
      m.embeddings_format = j.at("embeddings_format").get<std::string>();
    if (j.contains("identity"))
      m.identity = j.at("identity").get<std::string>();
    if (j.contains("groups"))
      m.groups = j.at("groups").get<std::vector<std::string>>();
    if (j.contains("task")) m.task = j.at("task").get<std::string>();
  } catch (const json::exception& e) {
    throw DataError(where + ": malformed manifest: " + e.what());
  }
  if (m.embeddings_format != "denb" && m.embeddings_format != "csv")
    throw DataError(where + ": embeddings_format must be 'denb' or 'csv'");
  if (m.task && *m.task != "regression" && *m.task != "binary")
    throw DataError(where + ": task must be 'regression' or 'binary'");
  return m;
}

inline json manifest_to_json(const Manifest& m) {
  json j;
  j["den_bundle"] = 1;
  j["n"] = m.n;
  j["d"] = m.d;
  j["records"] = m.records;
  j["embeddings"] = m.embeddings;
  j["embeddings_format"] = m.embeddings_format;
  if (m.identity) j["identity"] = *m.identity;
  if (!m.groups.empty()) j["groups"] = m.groups;
  if (m.task) j["task"] = *m.task;
  return j;
}

}  // namespace detail

/// Loads and validates a bundle. Every failure names the file and, where
/// possible, the line or offset.
inline Bundle load_bundle(const std::filesystem::path& manifest_path) {
  const std::string manifest_text = detail::read_file_bytes(manifest_path);
  json mjson;
  try {
    mjson = json::parse(manifest_text);
  } catch (const json::exception& e) {
    throw DataError(manifest_path.string() + ": " + e.what());
  }
  Bundle bundle;
  bundle.manifest = detail::manifest_from_json(mjson, manifest_path.string());
  bundle.manifest_path = manifest_path;
  const auto dir = manifest_path.parent_path();
  const Manifest& m = bundle.manifest;

  const auto records_path = dir / m.records;
  const auto embeddings_path = dir / m.embeddings;
  const std::string records_bytes = detail::read_file_bytes(records_path);
  const std::string embeddings_bytes = detail::read_file_bytes(embeddings_path);

  std::uint64_t h = detail::fnv1a64(records_bytes.data(), records_bytes.size());
  h = detail::fnv1a64(embeddings_bytes.data(), embeddings_bytes.size(), h);
  bundle.digest = "fnv1a64:" + detail::hex_u64(h);

  Dataset& ds = bundle.dataset;
  ds.n = m.n;
  ds.dim = m.d;

  if (m.embeddings_format == "denb") {
    std::size_t fn = 0, fd = 0;
    ds.embeddings = decode_denb(embeddings_bytes, embeddings_path.string(),
                                &fn, &fd);
    if (fn != m.n || fd != m.d)
      throw DataError(embeddings_path.string() + ": matrix is " +
                      std::to_string(fn) + "x" + std::to_string(fd) +
                      " but manifest declares " + std::to_string(m.n) + "x" +
                      std::to_string(m.d));
  } else {
    ds.embeddings = detail::parse_embeddings_csv(
        embeddings_bytes, embeddings_path.string(), m.n, m.d);
  }

  const auto table =
      detail::parse_records_csv(records_bytes, records_path.string());
  const std::string rwhere = records_path.string();
  if (table.rows.size() != m.n)
    throw DataError(rwhere + ": expected " + std::to_string(m.n) +
                    " record rows, got " + std::to_string(table.rows.size()));

  const std::size_t index_col = detail::column_index(table, "index", rwhere);
  const bool has_error =
      std::find(table.header.begin(), table.header.end(), "error") !=
      table.header.end();
  const bool has_pred =
      std::find(table.header.begin(), table.header.end(), "prediction") !=
      table.header.end();
  if (has_error == has_pred)
    throw DataError(rwhere +
                    ": records need exactly one of an 'error' column or a "
                    "'prediction'/'label' pair");

  for (std::size_t r = 0; r < table.rows.size(); ++r) {
    const auto got = detail::parse_number<std::size_t>(
        table.rows[r][index_col], rwhere + " row " + std::to_string(r + 2));
    if (got != r)
      throw DataError(rwhere + " row " + std::to_string(r + 2) +
                      ": index " + std::to_string(got) +
                      " out of order (expected " + std::to_string(r) + ")");
  }

  if (has_error) {
    const std::size_t error_col = detail::column_index(table, "error", rwhere);
    ds.errors.reserve(m.n);
    for (std::size_t r = 0; r < table.rows.size(); ++r)
      ds.errors.push_back(detail::parse_number<double>(
          table.rows[r][error_col], rwhere + " row " + std::to_string(r + 2)));
  } else {
    if (!m.task)
      throw DataError(manifest_path.string() +
                      ": manifest needs 'task' when records carry "
                      "prediction/label columns");
    const std::size_t pred_col =
        detail::column_index(table, "prediction", rwhere);
    const std::size_t label_col = detail::column_index(table, "label", rwhere);
    ModelRun run;
    run.name = manifest_path.stem().string();
    run.task_kind = *m.task == "regression" ? TaskKind::Regression
                                            : TaskKind::BinaryClassification;
    run.predictions.reserve(m.n);
    run.labels.reserve(m.n);
    for (std::size_t r = 0; r < table.rows.size(); ++r) {
      run.predictions.push_back(detail::parse_number<double>(
          table.rows[r][pred_col], rwhere + " row " + std::to_string(r + 2)));
      run.labels.push_back(detail::parse_number<double>(
          table.rows[r][label_col], rwhere + " row " + std::to_string(r + 2)));
    }
    ds.errors = per_datapoint_error(run);
    bundle.run = std::move(run);
  }

  auto read_labels = [&](const std::string& column) {
    const std::size_t c = detail::column_index(table, column, rwhere);
    std::vector<std::string> values;
    values.reserve(m.n);
    for (const auto& row : table.rows) values.push_back(row[c]);
    return LabelColumn::from_strings(values);
  };
  if (m.identity) ds.identity = read_labels(*m.identity);
  for (const auto& g : m.groups) ds.groups.emplace_back(g, read_labels(g));

  const auto violations = validate_dataset(ds);
  if (!violations.empty()) {
    std::string msg = manifest_path.string() + ": invalid dataset:";
    for (const auto& v : violations) {
      msg += "\n  " + v.field;
      if (v.index) msg += "[" + std::to_string(*v.index) + "]";
      msg += ": " + v.message;
    }
    throw DataError(msg);
  }
  return bundle;
}

struct SaveOptions {
  std::string embeddings_format = "denb";  // or "csv"
};

/// Writes manifest + records + embeddings under dir with the given stem;
/// returns the manifest path. Numeric fields round-trip exactly: floats
/// and doubles are serialized with shortest-round-trip formatting.
inline std::filesystem::path save_bundle(const std::filesystem::path& dir,
                                         const Dataset& ds,
                                         const std::string& stem,
                                         const SaveOptions& opt = {}) {
  std::filesystem::create_directories(dir);
  Manifest m;
  m.n = ds.n;
  m.d = ds.dim;
  m.records = stem + "_records.csv";
  m.embeddings_format = opt.embeddings_format;
  m.embeddings = stem + "_embeddings." +
                 (opt.embeddings_format == "csv" ? "csv" : "denb");
  if (ds.identity) m.identity = "identity";
  for (const auto& [name, col] : ds.groups) m.groups.push_back(name);

  std::string records = "index,error";
  if (ds.identity) records += ",identity";
  for (const auto& g : m.groups) records += "," + g;
  records += "\n";
  for (std::size_t i = 0; i < ds.n; ++i) {
    records += detail::format_number(i);
    records += ',';
    records += detail::format_number(ds.errors[i]);
    if (ds.identity) {
      records += ',';
      records += ds.identity->categories[ds.identity->codes[i]];
    }
    for (const auto& [name, col] : ds.groups) {
      records += ',';
      records += col.categories[col.codes[i]];
    }
    records += '\n';
  }
  detail::write_file_bytes(dir / m.records, records);

  if (opt.embeddings_format == "csv") {
    std::string text;
    for (std::size_t i = 0; i < ds.n; ++i) {
      for (std::size_t c = 0; c < ds.dim; ++c) {
        if (c) text += ',';
        text += detail::format_number(ds.embeddings[i * ds.dim + c]);
      }
      text += '\n';
    }
    detail::write_file_bytes(dir / m.embeddings, text);
  } else {
    detail::write_file_bytes(dir / m.embeddings,
                             encode_denb(ds.embeddings, ds.n, ds.dim));
  }

  const auto manifest_path = dir / (stem + ".json");
  detail::write_file_bytes(manifest_path,
                           detail::manifest_to_json(m).dump(2) + "\n");
  return manifest_path;
}

/// Writes a model family as one shared embeddings file plus per-model
/// records and manifests, indexed by a family.json listing every model's
/// manifest and planted disparity. Returns the index path.
inline std::filesystem::path save_model_family(const std::filesystem::path& dir,
                                               const ModelFamily& family,
                                               const SaveOptions& opt = {}) {
  std::filesystem::create_directories(dir);
  const Dataset& shared = family.dataset;
  const std::string emb_name =
      std::string("family_embeddings.") +
      (opt.embeddings_format == "csv" ? "csv" : "denb");
  if (opt.embeddings_format == "csv") {
    std::string text;
    for (std::size_t i = 0; i < shared.n; ++i) {
      for (std::size_t c = 0; c < shared.dim; ++c) {
        if (c) text += ',';
        text += detail::format_number(shared.embeddings[i * shared.dim + c]);
      }
      text += '\n';
    }
    detail::write_file_bytes(dir / emb_name, text);
  } else {
    detail::write_file_bytes(dir / emb_name,
                             encode_denb(shared.embeddings, shared.n, shared.dim));
  }

  json index;
  index["den_family"] = 1;
  index["models"] = json::array();
  for (const auto& model : family.models) {
    Manifest m;
    m.n = shared.n;
    m.d = shared.dim;
    m.records = model.name + "_records.csv";
    m.embeddings = emb_name;
    m.embeddings_format = opt.embeddings_format;
    if (shared.identity) m.identity = "identity";
    for (const auto& [name, col] : shared.groups) m.groups.push_back(name);

    std::string records = "index,error";
    if (shared.identity) records += ",identity";
    for (const auto& g : m.groups) records += "," + g;
    records += "\n";
    for (std::size_t i = 0; i < shared.n; ++i) {
      records += detail::format_number(i);
      records += ',';
      records += detail::format_number(model.errors[i]);
      if (shared.identity) {
        records += ',';
        records += shared.identity->categories[shared.identity->codes[i]];
      }
      for (const auto& [name, col] : shared.groups) {
        records += ',';
        records += col.categories[col.codes[i]];
      }
      records += '\n';
    }
    detail::write_file_bytes(dir / m.records, records);
    const auto manifest_path = dir / (model.name + ".json");
    detail::write_file_bytes(manifest_path,
                             detail::manifest_to_json(m).dump(2) + "\n");
    index["models"].push_back({{"name", model.name},
                               {"manifest", model.name + ".json"},
                               {"planted_group_disparity", model.group_disparity}});
  }
  const auto index_path = dir / "family.json";
  detail::write_file_bytes(index_path, index.dump(2) + "\n");
  return index_path;
}

// ---- report serialization ----

inline json curve_to_json(const DenCurve& curve) {
  json points = json::array();
  for (const auto& p : curve.points) points.push_back({p.size, p.disparity});
  return {{"size_kind", curve.size_kind == SizeKind::Knn ? "knn" : "radius"},
          {"metric",
           curve.metric == DisparityMetric::Rawlsian ? "rawlsian" : "stddev"},
          {"points", std::move(points)},
          {"auc", curve.auc}};
}

inline json estimation_curve_to_json(const EstimationErrorCurve& curve) {
  json points = json::array();
  for (const auto& p : curve.points) points.push_back({p.size, p.error});
  return {{"reference_disparity", curve.reference},
          {"points", std::move(points)},
          {"argmin_size", curve.argmin_size},
          {"min_error", curve.min_error}};
}

inline json correlation_to_json(const CorrelationResult& c) {
  return {{"coefficient", c.coefficient}, {"p_value", c.p_value}, {"n", c.n}};
}

inline json rank_report_to_json(const RankReport& report) {
  json refs = json::object();
  for (const auto& entry : report.references)
    refs[entry.reference] = {
        {"true_disparity", entry.true_disparity},
        {"kendall_tau", correlation_to_json(entry.correlation)}};
  return {{"models", report.model_names},
          {"auc_den", report.auc_den},
          {"references", std::move(refs)}};
}

/// Curve points as a flat CSV for plotting.
inline std::string curve_to_csv(const DenCurve& curve) {
  std::string out = "size,disparity\n";
  for (const auto& p : curve.points) {
    out += detail::format_number(p.size);
    out += ',';
    out += detail::format_number(p.disparity);
    out += '\n';
  }
  return out;
}

inline void write_report(const json& report, const std::filesystem::path& path) {
  detail::write_file_bytes(path, report.dump(2) + "\n");
}

}  // namespace den
