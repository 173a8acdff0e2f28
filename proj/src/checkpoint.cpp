/* Copyright 2026 The behavseg Authors

Licensed under the Apache License, Version 2.0 (the "License");
you may not use this file except in compliance with the License.
You may obtain a copy of the License at

        https://www.apache.org/licenses/LICENSE-2.0

Unless required by applicable law or agreed to in writing, software
distributed under the License is distributed on an "AS IS" BASIS,
WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
See the License for the specific language governing permissions and
        limitations under the License.
==============================================================================*/

#include "behavseg/checkpoint.hpp"

#include <bit>
#include <cstring>
#include <fstream>
#include <iterator>
#include <sstream>
#include <stdexcept>

#include "behavseg/config.hpp"

namespace behavseg::training {

namespace {

constexpr char kMagic[8] = {'B', 'H', 'V', 'S', 'E', 'G', 'v', '\0'};

template <typename T>
void put_le(std::string& out, T value) {
  using U = std::conditional_t<sizeof(T) == 8, std::uint64_t, std::uint32_t>;
  U bits = std::bit_cast<U>(value);
  for (std::size_t i = 0; i < sizeof(U); ++i) {
    out.push_back(static_cast<char>(bits & 0xff));
    bits >>= 8;
  }
}

class Reader {
 public:
  explicit Reader(const std::string& bytes) : bytes_(bytes) {}

  template <typename T>
  T get() {
    using U = std::conditional_t<sizeof(T) == 8, std::uint64_t, std::uint32_t>;
    need(sizeof(U));
    U bits = 0;
    for (std::size_t i = 0; i < sizeof(U); ++i) {
      bits |= static_cast<U>(static_cast<unsigned char>(bytes_[pos_ + i])) << (8 * i);
    }
    pos_ += sizeof(U);
    return std::bit_cast<T>(bits);
  }

  std::string take(std::size_t n) {
    need(n);
    std::string s = bytes_.substr(pos_, n);
    pos_ += n;
    return s;
  }

  bool done() const { return pos_ == bytes_.size(); }

 private:
  void need(std::size_t n) const {
    if (bytes_.size() - pos_ < n) throw std::runtime_error("checkpoint: truncated file");
  }
  const std::string& bytes_;
  std::size_t pos_ = 0;
};

const std::set<std::string> kModelKeys = {"format", "model.n_classes", "model.raw_dim",
                                          "model.feature_dim", "model.latent_dim"};

data::Matrix row_of(const Eigen::VectorXd& v) { return v.transpose(); }

data::Matrix history_matrix(const History& history) {
  data::Matrix m(static_cast<Eigen::Index>(history.size()), 7);
  for (std::size_t i = 0; i < history.size(); ++i) {
    const auto& h = history[i];
    m.row(static_cast<Eigen::Index>(i)) << h.epoch, h.anneal, h.loss, h.reconstruction,
        h.kl_z, h.kl_y, h.classification;
  }
  return m;
}

}  // namespace

void TensorArchive::add(std::string name, data::Matrix value) {
  if (contains(name)) throw std::logic_error("archive: duplicate tensor " + name);
  tensors.emplace_back(std::move(name), std::move(value));
}

bool TensorArchive::contains(const std::string& name) const {
  for (const auto& [n, v] : tensors)
    if (n == name) return true;
  return false;
}

const data::Matrix& TensorArchive::at(const std::string& name) const {
  for (const auto& [n, v] : tensors)
    if (n == name) return v;
  throw std::runtime_error("checkpoint: missing tensor " + name);
}

std::string TensorArchive::serialize() const {
  std::string out(kMagic, sizeof(kMagic));
  put_le(out, kFormatVersion);
  put_le(out, static_cast<std::uint64_t>(manifest.size()));
  out += manifest;
  put_le(out, static_cast<std::uint64_t>(tensors.size()));
  for (const auto& [name, m] : tensors) {
    put_le(out, static_cast<std::uint32_t>(name.size()));
    out += name;
    put_le(out, static_cast<std::uint64_t>(m.rows()));
    put_le(out, static_cast<std::uint64_t>(m.cols()));
    for (Eigen::Index i = 0; i < m.rows(); ++i)
      for (Eigen::Index j = 0; j < m.cols(); ++j) put_le(out, m(i, j));
  }
  return out;
}

TensorArchive TensorArchive::deserialize(const std::string& bytes) {
  Reader in(bytes);
  if (in.take(sizeof(kMagic)) != std::string(kMagic, sizeof(kMagic))) {
    throw std::runtime_error("checkpoint: bad magic, not a behavseg file");
  }
  const auto version = in.get<std::uint32_t>();
  if (version != kFormatVersion) {
    throw std::runtime_error("checkpoint: unsupported format version " +
                             std::to_string(version));
  }
  TensorArchive a;
  a.manifest = in.take(in.get<std::uint64_t>());
  const auto count = in.get<std::uint64_t>();
  for (std::uint64_t t = 0; t < count; ++t) {
    std::string name = in.take(in.get<std::uint32_t>());
    const auto rows = static_cast<Eigen::Index>(in.get<std::uint64_t>());
    const auto cols = static_cast<Eigen::Index>(in.get<std::uint64_t>());
    data::Matrix m(rows, cols);
    for (Eigen::Index i = 0; i < rows; ++i)
      for (Eigen::Index j = 0; j < cols; ++j) m(i, j) = in.get<double>();
    a.add(std::move(name), std::move(m));
  }
  if (!in.done()) throw std::runtime_error("checkpoint: trailing bytes");
  return a;
}

void TensorArchive::save(const std::filesystem::path& path) const {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot write " + path.string());
  const std::string bytes = serialize();
  out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
  if (!out) throw std::runtime_error("write failed: " + path.string());
}

TensorArchive TensorArchive::load(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("checkpoint not found: " + path.string());
  std::string bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  return deserialize(bytes);
}

std::string history_csv(const History& history) {
  std::ostringstream out;
  out << "epoch,anneal,loss,reconstruction,kl_z,kl_y,classification\n";
  for (const auto& h : history) {
    out << h.epoch << ',' << format_double(h.anneal) << ',' << format_double(h.loss) << ','
        << format_double(h.reconstruction) << ',' << format_double(h.kl_z) << ','
        << format_double(h.kl_y) << ',' << format_double(h.classification) << '\n';
  }
  return out.str();
}

void assign_parameters(const ad::ParamList& params, const TensorArchive& archive) {
  for (const auto& [name, var] : params) {
    const data::Matrix& value = archive.at(name);
    if (value.rows() != var.rows() || value.cols() != var.cols()) {
      throw std::runtime_error("checkpoint: tensor " + name + " has shape " +
                               std::to_string(value.rows()) + "x" +
                               std::to_string(value.cols()) + ", expected " +
                               std::to_string(var.rows()) + "x" +
                               std::to_string(var.cols()));
    }
    ad::Var v = var;
    v.mutable_value() = value;
  }
}

TensorArchive to_archive(const Model& model, const History& history) {
  KeyValueConfig manifest = model.config.to_config();
  manifest.set("format", "behavseg-model");
  manifest.set("model.n_classes", model.n_classes);
  manifest.set("model.raw_dim", model.raw_dim);
  manifest.set("model.feature_dim", model.feature_dim);
  manifest.set("model.latent_dim", model.latent_dim);

  TensorArchive a;
  a.manifest = manifest.to_string();
  a.add("standardizer.mean", model.standardizer.mean);
  a.add("standardizer.std", model.standardizer.std);
  for (const auto& [name, var] : model.parameters()) a.add(name, var.value());
  if (model.slds) a.add("slds.initial_probs", row_of(model.slds->initial_probs));
  if (model.gmdgm) a.add("gmdgm.class_probs", row_of(model.gmdgm->class_probs));
  a.add("history", history_matrix(history));
  return a;
}

Checkpoint from_archive(const TensorArchive& archive) {
  KeyValueConfig manifest = KeyValueConfig::parse(archive.manifest);
  if (manifest.get_or("format", "") != "behavseg-model") {
    throw std::runtime_error("checkpoint: not a trained-model file");
  }
  const int n_classes = static_cast<int>(manifest.get_int("model.n_classes"));
  const int raw_dim = static_cast<int>(manifest.get_int("model.raw_dim"));
  const int feature_dim = static_cast<int>(manifest.get_int("model.feature_dim"));
  const int latent_dim = static_cast<int>(manifest.get_int("model.latent_dim"));
  for (const auto& key : kModelKeys) manifest.erase(key);
  const TrainConfig config = TrainConfig::from_config(manifest);

  data::Standardizer standardizer;
  standardizer.mean = archive.at("standardizer.mean");
  standardizer.std = archive.at("standardizer.std");

  Checkpoint ck;
  ck.model = Model::init(config, n_classes, raw_dim, latent_dim, standardizer);
  if (ck.model.feature_dim != feature_dim) {
    throw std::runtime_error("checkpoint: inconsistent feature dimension");
  }
  assign_parameters(ck.model.parameters(), archive);
  if (ck.model.slds) ck.model.slds->initial_probs = archive.at("slds.initial_probs").row(0).transpose();
  if (ck.model.gmdgm) ck.model.gmdgm->class_probs = archive.at("gmdgm.class_probs").row(0).transpose();

  const data::Matrix& h = archive.at("history");
  if (h.rows() > 0 && h.cols() != 7) throw std::runtime_error("checkpoint: bad history shape");
  for (Eigen::Index i = 0; i < h.rows(); ++i) {
    ck.history.push_back({static_cast<int>(h(i, 0)), h(i, 1), h(i, 2), h(i, 3), h(i, 4),
                          h(i, 5), h(i, 6)});
  }
  return ck;
}

void save_checkpoint(const std::filesystem::path& path, const Model& model,
                     const History& history) {
  to_archive(model, history).save(path);
}

Checkpoint load_checkpoint(const std::filesystem::path& path) {
  return from_archive(TensorArchive::load(path));
}

TensorArchive slds_to_archive(const gen::SLDSParams& params) {
  KeyValueConfig manifest;
  manifest.set("format", "behavseg-slds");
  manifest.set("n_states", params.n_states);
  manifest.set("latent_dim", params.latent_dim);
  manifest.set("obs_dim", params.obs_dim);
  manifest.set("dynamics", params.kind == gen::DynamicsKind::linear ? "linear" : "nonlinear");
  manifest.set("decoder.slope", params.decoder.slope);
  TensorArchive a;
  a.manifest = manifest.to_string();
  ad::ParamList list;
  params.collect(list, "slds");
  for (const auto& [name, var] : list) a.add(name, var.value());
  a.add("slds.initial_probs", row_of(params.initial_probs));
  return a;
}

gen::SLDSParams slds_from_archive(const TensorArchive& archive) {
  const KeyValueConfig manifest = KeyValueConfig::parse(archive.manifest);
  if (manifest.get_or("format", "") != "behavseg-slds") {
    throw std::runtime_error("params file is not a generating-parameter archive");
  }
  const std::string dyn = manifest.get("dynamics");
  if (dyn != "linear" && dyn != "nonlinear") {
    throw std::runtime_error("params file: unknown dynamics '" + dyn + "'");
  }
  Rng rng(0);
  gen::SLDSParams p = gen::SLDSParams::init(
      static_cast<int>(manifest.get_int("n_states")),
      static_cast<int>(manifest.get_int("latent_dim")),
      static_cast<int>(manifest.get_int("obs_dim")),
      dyn == "linear" ? gen::DynamicsKind::linear : gen::DynamicsKind::nonlinear, rng);
  p.decoder.slope = manifest.get_double("decoder.slope");
  ad::ParamList list;
  p.collect(list, "slds");
  assign_parameters(list, archive);
  p.initial_probs = archive.at("slds.initial_probs").row(0).transpose();
  p.validate();
  return p;
}

}  // namespace behavseg::training
