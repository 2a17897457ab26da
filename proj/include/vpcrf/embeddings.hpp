#pragma once

// Word embedding providers E(x): a word2vec-style static table, a store of
// precomputed contextual vectors keyed by sentence id, and a deterministic
// hashed provider.

#include <cstdint>
#include <filesystem>
#include <map>
#include <string>
#include <string_view>
#include <unordered_map>
#include <variant>

#include <Eigen/Dense>
#include <json.hpp>

#include "vpcrf/corpus.hpp"

namespace vpcrf {

using Vector = Eigen::VectorXd;
using Matrix = Eigen::MatrixXd;
using RowMatrix = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

// One row per token.
using EmbeddingMatrix = RowMatrix;

struct HashedConfig {
  std::size_t dim = 1;
  std::uint64_t seed = 0;
};

struct OovZero {};
struct OovHashed {
  std::uint64_t seed = 0;
};
using OovPolicy = std::variant<OovZero, OovHashed>;

class StaticTable {
 public:
  StaticTable(std::size_t dim, OovPolicy oov);

  std::size_t dim() const { return dim_; }
  std::size_t size() const { return entries_.size(); }
  const OovPolicy& oov_policy() const { return oov_; }
  bool contains(std::string_view word) const;
  // Throws DataError on a duplicate word or wrong dimension.
  void insert(std::string word, Vector v);
  // Applies the OOV policy for unknown words (zero rows emit a warning).
  Vector lookup(std::string_view word) const;

 private:
  std::size_t dim_;
  OovPolicy oov_;
  std::unordered_map<std::string, Vector> entries_;
};

// Parses "<count> <dim>" followed by "<word> <dim floats>" lines.
StaticTable load_static_table(std::string_view text, OovPolicy oov);

class ContextualStore {
 public:
  explicit ContextualStore(std::size_t dim);

  std::size_t dim() const { return dim_; }
  std::size_t size() const { return entries_.size(); }
  void insert(std::string id, EmbeddingMatrix rows);
  // Throws DataError if the id is unknown.
  const EmbeddingMatrix& at(std::string_view id) const;
  // JSON-lines, records ordered by id.
  std::string serialize_jsonl() const;

 private:
  std::size_t dim_;
  std::map<std::string, EmbeddingMatrix, std::less<>> entries_;
};

// Each line: {"id": str, "vectors": [[float x d] x len]}.
ContextualStore load_contextual_store(std::string_view jsonl);

using Provider = std::variant<StaticTable, ContextualStore, HashedConfig>;

std::uint64_t fnv1a64(std::string_view bytes);
std::uint64_t splitmix64(std::uint64_t x);

// Bit-exact: state = fnv1a64(token) ^ seed; each coordinate advances
// state = splitmix64(state) and maps its top 53 bits to [-1, 1).
Vector hashed_vector(std::string_view token, const HashedConfig& cfg);

std::size_t provider_dim(const Provider& provider);

EmbeddingMatrix embed_sentence(const Provider& provider, const Sentence& sentence);

// Serializable description of a provider, stored in checkpoints and configs.
struct EmbeddingSpec {
  enum class Kind { Static, Contextual, Hashed };
  Kind kind = Kind::Hashed;
  std::filesystem::path path;  // static / contextual
  std::size_t dim = 16;        // hashed
  std::uint64_t seed = 0;      // hashed
  bool oov_hashed = false;     // static
  std::uint64_t oov_seed = 0;  // static

  nlohmann::json to_json() const;
  // Relative paths are resolved against `base_dir`. Unknown keys rejected.
  static EmbeddingSpec from_json(const nlohmann::json& j,
                                 const std::filesystem::path& base_dir = {});
};

Provider load_provider(const EmbeddingSpec& spec);

}  // namespace vpcrf
