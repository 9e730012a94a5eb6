// SPDX-License-Identifier: Apache-2.0

#include "attnsum/serialize.hpp"

#include <algorithm>
#include <array>
#include <bit>
#include <cstring>
#include <fstream>
#include <sstream>

#include "attnsum/errors.hpp"

namespace attnsum {

namespace {

constexpr std::array<char, 8> kMagic = {'A', 'T', 'T', 'N', 'S', 'U', 'M', '\0'};

template <typename T>
T to_little(T v) {
  if constexpr (std::endian::native == std::endian::big) {
    std::array<unsigned char, sizeof(T)> b;
    std::memcpy(b.data(), &v, sizeof(T));
    std::reverse(b.begin(), b.end());
    std::memcpy(&v, b.data(), sizeof(T));
  }
  return v;
}

class Writer {
 public:
  explicit Writer(std::ostream& os) : os_(os) {}

  template <typename T>
  void put(T v) {
    v = to_little(v);
    os_.write(reinterpret_cast<const char*>(&v), sizeof(T));
  }
  void put_string(const std::string& s) {
    put(static_cast<std::uint32_t>(s.size()));
    os_.write(s.data(), static_cast<std::streamsize>(s.size()));
  }

 private:
  std::ostream& os_;
};

class Reader {
 public:
  explicit Reader(std::istream& is) : is_(is) {}

  template <typename T>
  T get() {
    T v{};
    is_.read(reinterpret_cast<char*>(&v), sizeof(T));
    if (!is_) throw DataError("model file truncated");
    return to_little(v);
  }
  std::string get_string(std::size_t limit = 1 << 20) {
    const auto n = get<std::uint32_t>();
    if (n > limit) throw DataError("model file: implausible string length");
    std::string s(n, '\0');
    is_.read(s.data(), n);
    if (!is_) throw DataError("model file truncated");
    return s;
  }

 private:
  std::istream& is_;
};

}  // namespace

void write_model(std::ostream& os, const Model& model, const Vocab& vocab) {
  Writer w(os);
  os.write(kMagic.data(), kMagic.size());
  w.put(kModelFormatVersion);
  const auto& hp = model.hyper;
  for (std::size_t v : {hp.D, hp.H, hp.C, hp.L, hp.Q, hp.V}) w.put(static_cast<std::uint32_t>(v));
  w.put(static_cast<std::uint32_t>(hp.encoder));

  const auto& names = model.params.names();
  w.put(static_cast<std::uint32_t>(names.size()));
  for (const auto& name : names) {
    const Tensor& t = model.params.value(name);
    w.put_string(name);
    w.put(static_cast<std::uint32_t>(t.rank()));
    for (std::size_t d : t.shape()) w.put(static_cast<std::uint64_t>(d));
    for (double v : t.data()) w.put(v);
  }

  w.put(static_cast<std::uint32_t>(vocab.size()));
  for (TokenId i = 0; i < vocab.size(); ++i) {
    w.put_string(vocab.token(i));
    w.put(static_cast<std::uint64_t>(vocab.count(i)));
  }
  if (!os) throw DataError("failed writing model");
}

ModelFile read_model(std::istream& is) {
  std::array<char, 8> magic{};
  is.read(magic.data(), magic.size());
  if (!is || magic != kMagic) throw DataError("not a model file (bad magic)");
  Reader r(is);
  const auto version = r.get<std::uint32_t>();
  if (version != kModelFormatVersion) {
    throw DataError("unsupported model format version " + std::to_string(version));
  }
  Hyperparams hp;
  hp.D = r.get<std::uint32_t>();
  hp.H = r.get<std::uint32_t>();
  hp.C = r.get<std::uint32_t>();
  hp.L = r.get<std::uint32_t>();
  hp.Q = r.get<std::uint32_t>();
  hp.V = r.get<std::uint32_t>();
  const auto kind = r.get<std::uint32_t>();
  if (kind > static_cast<std::uint32_t>(EncoderKind::attention)) {
    throw DataError("model file: unknown encoder kind");
  }
  hp.encoder = static_cast<EncoderKind>(kind);
  try {
    hp.validate();
  } catch (const std::invalid_argument& e) {
    throw DataError(std::string("model file: ") + e.what());
  }

  // Start from a correctly shaped model so every expected tensor is present.
  ModelFile file{init_model(hp, 0), Vocab()};
  const auto count = r.get<std::uint32_t>();
  if (count != file.model.params.names().size()) {
    throw DataError("model file: tensor count does not match hyperparameters");
  }
  for (std::uint32_t k = 0; k < count; ++k) {
    const std::string name = r.get_string();
    if (!file.model.params.contains(name)) throw DataError("model file: unexpected tensor " + name);
    Tensor& t = file.model.params.value(name);
    const auto rank = r.get<std::uint32_t>();
    if (rank != t.rank()) throw DataError("model file: rank mismatch for " + name);
    for (std::size_t d = 0; d < rank; ++d) {
      if (r.get<std::uint64_t>() != t.shape()[d]) throw DataError("model file: shape mismatch for " + name);
    }
    for (double& v : t.data()) v = r.get<double>();
    if (!t.all_finite()) throw DataError("model file: non-finite values in " + name);
  }

  const auto vocab_size = r.get<std::uint32_t>();
  if (vocab_size != hp.V) throw DataError("model file: vocabulary size does not match V");
  for (std::uint32_t i = 0; i < vocab_size; ++i) {
    const std::string tok = r.get_string();
    const auto n = r.get<std::uint64_t>();
    if (i < Vocab::kReserved) {
      if (tok != file.vocab.token(i)) throw DataError("model file: bad reserved vocabulary entry");
      continue;
    }
    file.vocab.add(tok, n);
  }
  return file;
}

void save_model(const std::filesystem::path& path, const Model& model, const Vocab& vocab) {
  std::ofstream os(path, std::ios::binary);
  if (!os) throw DataError("cannot open " + path.string() + " for writing");
  write_model(os, model, vocab);
}

ModelFile load_model(const std::filesystem::path& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw DataError("cannot open model file " + path.string());
  return read_model(is);
}

std::string describe_model(const ModelFile& file) {
  const auto& hp = file.model.hyper;
  std::ostringstream os;
  os << "format_version " << kModelFormatVersion << '\n'
     << "encoder " << to_string(hp.encoder) << '\n'
     << "D " << hp.D << "\nH " << hp.H << "\nC " << hp.C << "\nL " << hp.L << "\nQ " << hp.Q
     << "\nV " << hp.V << '\n'
     << "vocab_size " << file.vocab.size() << '\n'
     << "parameters " << file.model.params.parameter_count() << '\n';
  for (const auto& name : file.model.params.names()) {
    const auto& shape = file.model.params.value(name).shape();
    os << "tensor " << name << ' ';
    for (std::size_t i = 0; i < shape.size(); ++i) os << (i ? "x" : "") << shape[i];
    os << '\n';
  }
  return os.str();
}

}  // namespace attnsum
