#pragma once

#include <cstdint>
#include <cstring>
#include <fstream>
#include <map>
#include <stdexcept>
#include <string>

#include <json.hpp>

#include "lstego/core/nn.hpp"

namespace lstego {

// Self-describing checkpoint: a text magic line, a JSON header (metadata plus
// a tensor index), then the raw little-endian tensor payload.
//
//   LSTEGO-ARCHIVE v1\n
//   <header byte count>\n
//   <header JSON>
//   <payload>
class Archive {
 public:
  nlohmann::json meta = nlohmann::json::object();

  void put(const std::string& name, const Tensor<float>& t) { f32_[name] = t; }
  void put(const std::string& name, const Tensor<double>& t) { f64_[name] = t; }

  bool has(const std::string& name) const { return f32_.count(name) || f64_.count(name); }

  template <typename T>
  Tensor<T> get(const std::string& name) const {
    if (auto it = f32_.find(name); it != f32_.end()) return it->second.template cast<T>();
    if (auto it = f64_.find(name); it != f64_.end()) return it->second.template cast<T>();
    throw std::runtime_error("archive has no tensor '" + name + "'");
  }

  template <typename T>
  void put_params(const std::string& prefix, const nn::ParamSet<T>& ps) {
    for (const auto& [name, v] : ps.items()) put(prefix + name, v.value());
  }

  template <typename T>
  void load_params(const std::string& prefix, nn::ParamSet<T>& ps) const {
    for (auto& [name, v] : ps.items()) {
      Tensor<T> t = get<T>(prefix + name);
      if (t.shape() != v.shape())
        throw std::runtime_error("archive tensor '" + prefix + name + "' has shape " + shape_str(t.shape()) +
                                 ", expected " + shape_str(v.shape()));
      v.mutable_value() = std::move(t);
    }
  }

  void save(const std::string& path) const {
    nlohmann::json header;
    header["meta"] = meta;
    nlohmann::json index = nlohmann::json::array();
    std::uint64_t offset = 0;
    auto add_index = [&](const std::string& name, const Shape& s, const char* dtype, std::size_t bytes) {
      index.push_back({{"name", name}, {"shape", s}, {"dtype", dtype}, {"offset", offset}, {"bytes", bytes}});
      offset += bytes;
    };
    for (const auto& [n, t] : f32_) add_index(n, t.shape(), "f32", t.size() * 4);
    for (const auto& [n, t] : f64_) add_index(n, t.shape(), "f64", t.size() * 8);
    header["tensors"] = index;
    const std::string hs = header.dump();

    std::ofstream out(path, std::ios::binary);
    if (!out) throw std::runtime_error("cannot write archive " + path);
    out << kMagic << '\n' << hs.size() << '\n' << hs;
    for (const auto& [n, t] : f32_) out.write(reinterpret_cast<const char*>(t.data()), t.size() * 4);
    for (const auto& [n, t] : f64_) out.write(reinterpret_cast<const char*>(t.data()), t.size() * 8);
    if (!out) throw std::runtime_error("failed writing archive " + path);
  }

  static Archive load(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw std::runtime_error("cannot open archive " + path);
    std::string magic, len_line;
    std::getline(in, magic);
    if (magic != kMagic) throw std::runtime_error(path + " is not an lstego archive");
    std::getline(in, len_line);
    const std::size_t len = std::stoull(len_line);
    std::string hs(len, '\0');
    in.read(hs.data(), static_cast<std::streamsize>(len));
    const auto header = nlohmann::json::parse(hs);
    const auto payload_start = in.tellg();

    Archive a;
    a.meta = header.at("meta");
    for (const auto& e : header.at("tensors")) {
      const Shape s = e.at("shape").get<Shape>();
      const auto off = e.at("offset").get<std::uint64_t>();
      in.seekg(payload_start + static_cast<std::streamoff>(off));
      if (e.at("dtype") == "f32") {
        Tensor<float> t(s);
        in.read(reinterpret_cast<char*>(t.data()), static_cast<std::streamsize>(t.size() * 4));
        a.f32_[e.at("name")] = std::move(t);
      } else {
        Tensor<double> t(s);
        in.read(reinterpret_cast<char*>(t.data()), static_cast<std::streamsize>(t.size() * 8));
        a.f64_[e.at("name")] = std::move(t);
      }
      if (!in) throw std::runtime_error("truncated archive " + path);
    }
    return a;
  }

 private:
  static constexpr const char* kMagic = "LSTEGO-ARCHIVE v1";
  std::map<std::string, Tensor<float>> f32_;
  std::map<std::string, Tensor<double>> f64_;
};

}  // namespace lstego
