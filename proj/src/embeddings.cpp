#include "vpcrf/embeddings.hpp"

#include <charconv>
#include <cmath>
#include <sstream>

#include <fmt/format.h>

#include "vpcrf/error.hpp"
#include "vpcrf/log.hpp"

namespace vpcrf {
namespace {

using nlohmann::json;

std::vector<std::string_view> split_ws(std::string_view line) {
  std::vector<std::string_view> out;
  std::size_t i = 0;
  while (i < line.size()) {
    while (i < line.size() && (line[i] == ' ' || line[i] == '\t')) ++i;
    std::size_t j = i;
    while (j < line.size() && line[j] != ' ' && line[j] != '\t') ++j;
    if (j > i) out.push_back(line.substr(i, j - i));
    i = j;
  }
  return out;
}

template <typename T>
bool parse_number(std::string_view s, T& out) {
  auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), out);
  return ec == std::errc() && ptr == s.data() + s.size();
}

}  // namespace

StaticTable::StaticTable(std::size_t dim, OovPolicy oov) : dim_(dim), oov_(oov) {
  if (dim == 0) throw DataError("embedding dimension must be positive");
}

bool StaticTable::contains(std::string_view word) const {
  return entries_.find(std::string(word)) != entries_.end();
}

void StaticTable::insert(std::string word, Vector v) {
  if (static_cast<std::size_t>(v.size()) != dim_) {
    throw DataError(fmt::format("vector for '{}' has dimension {}, expected {}", word,
                                v.size(), dim_));
  }
  if (!v.allFinite()) throw DataError(fmt::format("non-finite vector for '{}'", word));
  if (!entries_.emplace(word, std::move(v)).second) {
    throw DataError(fmt::format("duplicate word '{}'", word));
  }
}

Vector StaticTable::lookup(std::string_view word) const {
  if (auto it = entries_.find(std::string(word)); it != entries_.end()) return it->second;
  if (const auto* hashed = std::get_if<OovHashed>(&oov_)) {
    return hashed_vector(word, HashedConfig{dim_, hashed->seed});
  }
  warn(fmt::format("out-of-vocabulary token '{}' embedded as a zero vector", word));
  return Vector::Zero(static_cast<Eigen::Index>(dim_));
}

StaticTable load_static_table(std::string_view text, OovPolicy oov) {
  std::vector<std::string_view> lines;
  std::size_t pos = 0;
  while (pos <= text.size()) {
    std::size_t nl = text.find('\n', pos);
    if (nl == std::string_view::npos) nl = text.size();
    std::string_view line = text.substr(pos, nl - pos);
    if (!line.empty() && line.back() == '\r') line.remove_suffix(1);
    lines.push_back(line);
    pos = nl + 1;
  }
  while (!lines.empty() && split_ws(lines.back()).empty()) lines.pop_back();
  if (lines.empty()) throw DataError("static table: empty input");

  const auto header = split_ws(lines[0]);
  std::size_t count = 0;
  std::size_t dim = 0;
  if (header.size() != 2 || !parse_number(header[0], count) ||
      !parse_number(header[1], dim) || dim == 0) {
    throw DataError("static table line 1: expected header '<count> <dim>'");
  }
  if (lines.size() - 1 != count) {
    throw DataError(fmt::format("static table: header declares {} rows, found {}", count,
                                lines.size() - 1));
  }

  StaticTable table(dim, oov);
  for (std::size_t ln = 1; ln < lines.size(); ++ln) {
    const auto fields = split_ws(lines[ln]);
    if (fields.size() != dim + 1) {
      throw DataError(fmt::format("static table line {}: expected word plus {} values, got {}",
                                  ln + 1, dim, fields.empty() ? 0 : fields.size() - 1));
    }
    Vector v(static_cast<Eigen::Index>(dim));
    for (std::size_t j = 0; j < dim; ++j) {
      double x = 0.0;
      if (!parse_number(fields[j + 1], x) || !std::isfinite(x)) {
        throw DataError(fmt::format("static table line {}: bad value '{}'", ln + 1,
                                    fields[j + 1]));
      }
      v[static_cast<Eigen::Index>(j)] = x;
    }
    try {
      table.insert(std::string(fields[0]), std::move(v));
    } catch (const DataError& e) {
      throw DataError(fmt::format("static table line {}: {}", ln + 1, e.what()));
    }
  }
  return table;
}

ContextualStore::ContextualStore(std::size_t dim) : dim_(dim) {
  if (dim == 0) throw DataError("embedding dimension must be positive");
}

void ContextualStore::insert(std::string id, EmbeddingMatrix rows) {
  if (static_cast<std::size_t>(rows.cols()) != dim_) {
    throw DataError(fmt::format("contextual vectors for '{}' have dimension {}, expected {}",
                                id, rows.cols(), dim_));
  }
  if (!rows.allFinite()) throw DataError(fmt::format("non-finite vectors for '{}'", id));
  if (!entries_.emplace(id, std::move(rows)).second) {
    throw DataError(fmt::format("duplicate contextual id '{}'", id));
  }
}

const EmbeddingMatrix& ContextualStore::at(std::string_view id) const {
  auto it = entries_.find(id);
  if (it == entries_.end()) {
    throw DataError(fmt::format("sentence id '{}' not found in contextual store", id));
  }
  return it->second;
}

std::string ContextualStore::serialize_jsonl() const {
  std::string out;
  for (const auto& [id, rows] : entries_) {
    json vectors = json::array();
    for (Eigen::Index r = 0; r < rows.rows(); ++r) {
      vectors.push_back(std::vector<double>(rows.row(r).begin(), rows.row(r).end()));
    }
    out += json{{"id", id}, {"vectors", std::move(vectors)}}.dump();
    out += '\n';
  }
  return out;
}

ContextualStore load_contextual_store(std::string_view jsonl) {
  std::optional<ContextualStore> store;
  std::size_t line_no = 0;
  std::size_t pos = 0;
  while (pos < jsonl.size()) {
    std::size_t nl = jsonl.find('\n', pos);
    if (nl == std::string_view::npos) nl = jsonl.size();
    std::string_view line = jsonl.substr(pos, nl - pos);
    pos = nl + 1;
    ++line_no;
    if (split_ws(line).empty()) continue;

    json rec;
    try {
      rec = json::parse(line);
      const auto id = rec.at("id").get<std::string>();
      const auto& vecs = rec.at("vectors");
      if (!vecs.is_array() || vecs.empty()) throw DataError("'vectors' must be non-empty");
      const std::size_t dim = vecs[0].size();
      if (!store) store.emplace(dim);
      EmbeddingMatrix rows(static_cast<Eigen::Index>(vecs.size()),
                           static_cast<Eigen::Index>(store->dim()));
      for (std::size_t r = 0; r < vecs.size(); ++r) {
        if (!vecs[r].is_array() || vecs[r].size() != store->dim()) {
          throw DataError(fmt::format("vector {} has wrong dimension", r));
        }
        for (std::size_t c = 0; c < store->dim(); ++c) {
          rows(static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(c)) =
              vecs[r][c].get<double>();
        }
      }
      store->insert(id, std::move(rows));
    } catch (const json::exception& e) {
      throw DataError(fmt::format("contextual store line {}: {}", line_no, e.what()));
    } catch (const DataError& e) {
      throw DataError(fmt::format("contextual store line {}: {}", line_no, e.what()));
    }
  }
  if (!store) throw DataError("contextual store: no records");
  return std::move(*store);
}

std::uint64_t fnv1a64(std::string_view bytes) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char ch : bytes) {
    h ^= ch;
    h *= 0x100000001b3ULL;
  }
  return h;
}

std::uint64_t splitmix64(std::uint64_t x) {
  std::uint64_t z = x + 0x9e3779b97f4a7c15ULL;
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

Vector hashed_vector(std::string_view token, const HashedConfig& cfg) {
  if (cfg.dim == 0) throw NumericError("hashed embedding dimension must be positive");
  Vector v(static_cast<Eigen::Index>(cfg.dim));
  std::uint64_t state = fnv1a64(token) ^ cfg.seed;
  for (std::size_t j = 0; j < cfg.dim; ++j) {
    state = splitmix64(state);
    v[static_cast<Eigen::Index>(j)] =
        static_cast<double>(state >> 11) * 0x1.0p-53 * 2.0 - 1.0;
  }
  return v;
}

std::size_t provider_dim(const Provider& provider) {
  return std::visit(
      [](const auto& p) -> std::size_t {
        if constexpr (std::is_same_v<std::decay_t<decltype(p)>, HashedConfig>) {
          return p.dim;
        } else {
          return p.dim();
        }
      },
      provider);
}

EmbeddingMatrix embed_sentence(const Provider& provider, const Sentence& sentence) {
  const auto n = static_cast<Eigen::Index>(sentence.tokens.size());
  const auto d = static_cast<Eigen::Index>(provider_dim(provider));
  if (const auto* store = std::get_if<ContextualStore>(&provider)) {
    if (!sentence.id) throw DataError("contextual embeddings require sentence ids");
    const auto& rows = store->at(*sentence.id);
    if (rows.rows() != n) {
      throw DataError(fmt::format("contextual store has {} vectors for '{}', sentence has {} tokens",
                                  rows.rows(), *sentence.id, n));
    }
    return rows;
  }
  EmbeddingMatrix out(n, d);
  for (Eigen::Index i = 0; i < n; ++i) {
    const auto& tok = sentence.tokens[static_cast<std::size_t>(i)];
    if (const auto* table = std::get_if<StaticTable>(&provider)) {
      out.row(i) = table->lookup(tok).transpose();
    } else {
      out.row(i) = hashed_vector(tok, std::get<HashedConfig>(provider)).transpose();
    }
  }
  return out;
}

json EmbeddingSpec::to_json() const {
  switch (kind) {
    case Kind::Hashed:
      return {{"kind", "hashed"}, {"dim", dim}, {"seed", seed}};
    case Kind::Contextual:
      return {{"kind", "contextual"}, {"path", path.generic_string()}};
    case Kind::Static: {
      json j = {{"kind", "static"}, {"path", path.generic_string()},
                {"oov", oov_hashed ? "hashed" : "zero"}};
      if (oov_hashed) j["oov_seed"] = oov_seed;
      return j;
    }
  }
  return {};
}

EmbeddingSpec EmbeddingSpec::from_json(const json& j, const std::filesystem::path& base_dir) {
  if (!j.is_object()) throw ConfigError("embeddings: expected an object");
  EmbeddingSpec spec;
  const auto kind = j.value("kind", std::string{});
  std::vector<std::string> allowed;
  if (kind == "hashed") {
    spec.kind = Kind::Hashed;
    spec.dim = j.value("dim", spec.dim);
    spec.seed = j.value("seed", spec.seed);
    if (spec.dim == 0) throw ConfigError("embeddings.dim must be positive");
    allowed = {"kind", "dim", "seed"};
  } else if (kind == "static" || kind == "contextual") {
    spec.kind = kind == "static" ? Kind::Static : Kind::Contextual;
    if (!j.contains("path") || !j.at("path").is_string()) {
      throw ConfigError(fmt::format("embeddings: '{}' provider needs a 'path'", kind));
    }
    std::filesystem::path p = j.at("path").get<std::string>();
    spec.path = (p.is_relative() && !base_dir.empty() ? base_dir / p : p).lexically_normal();
    allowed = {"kind", "path"};
    if (spec.kind == Kind::Static) {
      const auto oov = j.value("oov", std::string("zero"));
      if (oov != "zero" && oov != "hashed") {
        throw ConfigError("embeddings.oov must be 'zero' or 'hashed'");
      }
      spec.oov_hashed = oov == "hashed";
      spec.oov_seed = j.value("oov_seed", std::uint64_t{0});
      allowed.insert(allowed.end(), {"oov", "oov_seed"});
    }
  } else {
    throw ConfigError(fmt::format("embeddings.kind '{}' is not one of static, contextual, hashed",
                                  kind));
  }
  for (const auto& [key, _] : j.items()) {
    if (std::find(allowed.begin(), allowed.end(), key) == allowed.end()) {
      throw ConfigError(fmt::format("embeddings: unknown key '{}'", key));
    }
  }
  return spec;
}

Provider load_provider(const EmbeddingSpec& spec) {
  switch (spec.kind) {
    case EmbeddingSpec::Kind::Hashed:
      return HashedConfig{spec.dim, spec.seed};
    case EmbeddingSpec::Kind::Contextual:
      return load_contextual_store(read_text_file(spec.path));
    case EmbeddingSpec::Kind::Static: {
      OovPolicy oov = OovZero{};
      if (spec.oov_hashed) oov = OovHashed{spec.oov_seed};
      return load_static_table(read_text_file(spec.path), oov);
    }
  }
  throw ConfigError("unknown embedding provider");
}

}  // namespace vpcrf
