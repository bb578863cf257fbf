#pragma once

// Artifact persistence. Every payload file travels with a `<path>.manifest.json`
// sidecar pinning kind, shape and an FNV-1a digest of the payload bytes, so a
// downstream stage refuses corrupt or mismatched inputs instead of consuming
// them. Binary payloads are row-major little-endian binary32; reports are
// canonical JSON so equal content means equal bytes. All writes go through a
// temp file plus rename.

#include <bit>
#include <cstdint>
#include <cstring>
#include <ctime>
#include <filesystem>
#include <fstream>
#include <string>
#include <vector>

#include "specprobe/canonical_json.hpp"
#include "specprobe/digest.hpp"
#include "specprobe/embedding.hpp"
#include "specprobe/epochs.hpp"
#include "specprobe/errors.hpp"
#include "specprobe/masked_ae.hpp"
#include "specprobe/probe.hpp"

namespace specprobe {

static_assert(std::endian::native == std::endian::little,
              "payload format is little-endian binary32");

inline std::string manifest_path(const std::string& payload_path) {
  return payload_path + ".manifest.json";
}

namespace io_detail {

inline std::string now_iso8601() {
  const std::time_t t = std::time(nullptr);
  std::tm tm{};
  gmtime_r(&t, &tm);
  char buf[32];
  std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", &tm);
  return buf;
}

inline void write_file_atomic(const std::string& path, const std::string& bytes) {
  const std::string tmp = path + ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw input_error("cannot open for writing: " + tmp);
    out.write(bytes.data(), std::streamsize(bytes.size()));
    out.flush();
    if (!out) throw input_error("short write: " + tmp);
  }
  std::error_code ec;
  std::filesystem::rename(tmp, path, ec);
  if (ec) throw input_error("cannot move " + tmp + " into place: " + ec.message());
}

inline std::string read_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw input_error("cannot open: " + path);
  std::string bytes((std::istreambuf_iterator<char>(in)),
                    std::istreambuf_iterator<char>());
  if (in.bad()) throw input_error("read failed: " + path);
  return bytes;
}

inline std::string matrix_payload(const Matrix& m) {
  std::string bytes(std::size_t(m.size()) * 4, '\0');
  std::size_t off = 0;
  for (Eigen::Index i = 0; i < m.rows(); ++i)
    for (Eigen::Index j = 0; j < m.cols(); ++j) {
      const float f = static_cast<float>(m(i, j));
      std::memcpy(bytes.data() + off, &f, 4);
      off += 4;
    }
  return bytes;
}

inline Matrix matrix_from_payload(const std::string& bytes, std::size_t n,
                                  std::size_t d, const std::string& what) {
  const std::size_t expected = n * d * 4;
  if (bytes.size() != expected)
    throw input_error(what + ": payload size mismatch: expected " +
                      std::to_string(expected) + " bytes (" + std::to_string(n) +
                      " rows x " + std::to_string(d) + " cols), found " +
                      std::to_string(bytes.size()));
  Matrix m(static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(d));
  std::size_t off = 0;
  for (Eigen::Index i = 0; i < m.rows(); ++i)
    for (Eigen::Index j = 0; j < m.cols(); ++j) {
      float f;
      std::memcpy(&f, bytes.data() + off, 4);
      m(i, j) = double(f);
      off += 4;
    }
  return m;
}

inline json load_manifest(const std::string& payload_path,
                          const std::string& expected_kind) {
  const std::string mpath = manifest_path(payload_path);
  json m;
  try {
    m = json::parse(read_file(mpath));
  } catch (const json::parse_error& e) {
    throw input_error("manifest is not valid JSON: " + mpath + ": " + e.what());
  }
  if (!m.is_object() || !m.contains("kind"))
    throw input_error("manifest lacks a kind field: " + mpath);
  if (!expected_kind.empty() && m["kind"] != expected_kind)
    throw input_error("kind mismatch: expected " + expected_kind + ", found " +
                      m["kind"].get<std::string>() + " in " + mpath);
  return m;
}

inline void check_digest(const std::string& bytes, const json& manifest,
                         const std::string& payload_path) {
  const std::string expected = manifest.at("payload_digest").get<std::string>();
  const std::string actual = digest_hex(bytes);
  if (expected != actual)
    throw validation_error("payload digest mismatch for " + payload_path +
                           ": manifest " + expected + ", recomputed " + actual);
}

inline void write_manifest(const std::string& payload_path, json manifest) {
  manifest["version"] = 1;
  manifest["created_at"] = now_iso8601();
  write_file_atomic(manifest_path(payload_path), canonical_dump(manifest));
}

}  // namespace io_detail

inline void save_epochs(const EpochSet& epochs, const std::string& path) {
  epochs.validate();
  const std::string payload = io_detail::matrix_payload(epochs.data);

  json meta = json::array();
  for (const auto& m : epochs.meta) {
    json rec;
    rec["seed_used"] = m.seed_used;
    if (m.theta) rec["theta"] = *m.theta;
    if (m.subject_id) rec["subject_id"] = *m.subject_id;
    if (m.task_id) rec["task_id"] = *m.task_id;
    meta.push_back(std::move(rec));
  }

  json manifest;
  manifest["kind"] = "epochs";
  manifest["shape"] = {epochs.trials(), epochs.samples()};
  manifest["fs"] = epochs.fs;
  manifest["channels"] = epochs.channels;
  manifest["meta"] = std::move(meta);
  manifest["payload_digest"] = digest_hex(payload);

  io_detail::write_file_atomic(path, payload);
  io_detail::write_manifest(path, std::move(manifest));
}

inline EpochSet load_epochs(const std::string& path) {
  const json manifest = io_detail::load_manifest(path, "epochs");
  const auto shape = manifest.at("shape").get<std::vector<std::size_t>>();
  if (shape.size() != 2) throw input_error("epochs manifest: shape must be [n, l]");

  const std::string payload = io_detail::read_file(path);

  EpochSet out;
  out.data = io_detail::matrix_from_payload(payload, shape[0], shape[1], path);
  io_detail::check_digest(payload, manifest, path);
  out.fs = manifest.at("fs").get<double>();
  out.channels = manifest.at("channels").get<std::size_t>();

  const json& meta = manifest.at("meta");
  if (meta.size() != shape[0])
    throw input_error("epochs manifest: " + std::to_string(shape[0]) +
                      " rows but " + std::to_string(meta.size()) +
                      " meta records");
  out.meta.resize(meta.size());
  for (std::size_t i = 0; i < meta.size(); ++i) {
    const json& rec = meta[i];
    out.meta[i].seed_used = rec.at("seed_used").get<std::uint64_t>();
    if (rec.contains("theta")) out.meta[i].theta = rec["theta"].get<double>();
    if (rec.contains("subject_id"))
      out.meta[i].subject_id = rec["subject_id"].get<std::string>();
    if (rec.contains("task_id"))
      out.meta[i].task_id = rec["task_id"].get<std::string>();
  }
  out.validate();
  return out;
}

inline void save_embeddings(const EmbeddingSet& emb, const std::string& path) {
  emb.validate();
  const std::string payload = io_detail::matrix_payload(emb.data);

  json manifest;
  manifest["kind"] = "embeddings";
  manifest["shape"] = {emb.rows(), emb.dim()};
  manifest["embedder_id"] = emb.embedder_id;
  manifest["config_digest"] = emb.config_digest;
  manifest["payload_digest"] = digest_hex(payload);

  io_detail::write_file_atomic(path, payload);
  io_detail::write_manifest(path, std::move(manifest));
}

// Entry point for embeddings produced elsewhere: everything the manifest
// claims is re-checked before the matrix is accepted.
inline EmbeddingSet import_embeddings(const std::string& path) {
  const json manifest = io_detail::load_manifest(path, "embeddings");
  const auto shape = manifest.at("shape").get<std::vector<std::size_t>>();
  if (shape.size() != 2)
    throw input_error("embeddings manifest: shape must be [n, d]");

  const std::string payload = io_detail::read_file(path);

  EmbeddingSet out;
  out.data = io_detail::matrix_from_payload(payload, shape[0], shape[1], path);
  io_detail::check_digest(payload, manifest, path);
  out.embedder_id = manifest.at("embedder_id").get<std::string>();
  out.config_digest = manifest.at("config_digest").get<std::string>();
  out.validate();
  return out;
}

inline void save_model(const MaskedAEModel& model, const std::string& path) {
  model.validate();
  std::string payload;
  for (const Matrix* t : {&model.w1, &model.b1, &model.w2, &model.b2, &model.w3,
                          &model.b3, &model.w4, &model.b4})
    payload += io_detail::matrix_payload(*t);

  json manifest;
  manifest["kind"] = "model";
  manifest["shape"] = {std::size_t(model.input_len()), std::size_t(model.hidden()),
                       std::size_t(model.d_latent())};
  manifest["normalize"] = normalize_name(model.normalize);
  manifest["input_shift"] = model.input_shift;
  manifest["input_scale"] = model.input_scale;
  manifest["config_digest"] = model.config_digest;
  manifest["train_log"] = model.train_log;
  manifest["payload_digest"] = digest_hex(payload);

  io_detail::write_file_atomic(path, payload);
  io_detail::write_manifest(path, std::move(manifest));
}

inline MaskedAEModel load_model(const std::string& path) {
  const json manifest = io_detail::load_manifest(path, "model");
  const auto shape = manifest.at("shape").get<std::vector<std::size_t>>();
  if (shape.size() != 3)
    throw input_error("model manifest: shape must be [input_len, hidden, d_latent]");
  const std::size_t l = shape[0], h = shape[1], d = shape[2];

  const std::string payload = io_detail::read_file(path);

  MaskedAEModel model;
  model.normalize = normalize_from_name(manifest.at("normalize").get<std::string>());
  model.input_shift = manifest.at("input_shift").get<double>();
  model.input_scale = manifest.at("input_scale").get<double>();
  model.config_digest = manifest.at("config_digest").get<std::string>();
  model.train_log = manifest.at("train_log").get<std::vector<double>>();

  const std::vector<std::pair<std::size_t, std::size_t>> shapes = {
      {l, h}, {1, h}, {h, d}, {1, d}, {d, h}, {1, h}, {h, l}, {1, l}};
  std::vector<Matrix*> tensors = {&model.w1, &model.b1, &model.w2, &model.b2,
                                  &model.w3, &model.b3, &model.w4, &model.b4};
  std::size_t off = 0;
  for (std::size_t t = 0; t < tensors.size(); ++t) {
    const std::size_t count = shapes[t].first * shapes[t].second * 4;
    if (off + count > payload.size())
      throw input_error(path + ": payload size mismatch: expected " +
                        std::to_string(off + count) + "+ bytes, found " +
                        std::to_string(payload.size()));
    *tensors[t] = io_detail::matrix_from_payload(
        payload.substr(off, count), shapes[t].first, shapes[t].second, path);
    off += count;
  }
  if (off != payload.size())
    throw input_error(path + ": payload size mismatch: expected " +
                      std::to_string(off) + " bytes, found " +
                      std::to_string(payload.size()));
  io_detail::check_digest(payload, manifest, path);
  model.validate();
  return model;
}

// Report content stays timestamp-free so identical results are identical
// bytes; the sidecar carries the timestamp and the content digest.
inline void emit_report(const json& report, const std::string& path) {
  const std::string bytes = canonical_dump(report);

  json manifest;
  manifest["kind"] = "report";
  manifest["shape"] = json::array();
  manifest["payload_digest"] = digest_hex(bytes);

  io_detail::write_file_atomic(path, bytes);
  io_detail::write_manifest(path, std::move(manifest));
}

inline json load_report(const std::string& path) {
  const json manifest = io_detail::load_manifest(path, "report");
  const std::string bytes = io_detail::read_file(path);
  io_detail::check_digest(bytes, manifest, path);
  try {
    return json::parse(bytes);
  } catch (const json::parse_error& e) {
    throw input_error("report is not valid JSON: " + path + ": " + e.what());
  }
}

struct VerifyResult {
  std::string path;
  std::string kind;
  bool ok = false;
  std::string message;  // empty when ok
};

// Recomputes the payload digest against the sidecar. Any single-byte change
// to the payload flips the FNV-1a digest, so corruption is always reported.
inline VerifyResult verify_artifact(const std::string& path) {
  VerifyResult r;
  r.path = path;
  const json manifest = io_detail::load_manifest(path, "");
  r.kind = manifest.at("kind").get<std::string>();
  const std::string payload = io_detail::read_file(path);
  const std::string expected = manifest.at("payload_digest").get<std::string>();
  const std::string actual = digest_hex(payload);
  if (expected == actual) {
    r.ok = true;
  } else {
    r.message = "digest mismatch: manifest " + expected + ", recomputed " + actual;
  }
  return r;
}

inline void save_split(const Split& split, std::size_t n_rows,
                       const std::string& path) {
  split.validate(n_rows);
  std::string csv = "epoch_index,split\n";
  for (const auto i : split.train) csv += std::to_string(i) + ",train\n";
  for (const auto i : split.test) csv += std::to_string(i) + ",test\n";
  io_detail::write_file_atomic(path, csv);
}

inline Split load_split(const std::string& path, std::size_t n_rows) {
  const std::string csv = io_detail::read_file(path);
  Split split;
  std::size_t line_no = 0;
  std::size_t pos = 0;
  while (pos < csv.size()) {
    std::size_t end = csv.find('\n', pos);
    if (end == std::string::npos) end = csv.size();
    std::string line = csv.substr(pos, end - pos);
    if (!line.empty() && line.back() == '\r') line.pop_back();
    pos = end + 1;
    ++line_no;
    if (line_no == 1) {
      if (line != "epoch_index,split")
        throw input_error(path + ": expected header 'epoch_index,split', found '" +
                          line + "'");
      continue;
    }
    if (line.empty()) continue;
    const std::size_t comma = line.find(',');
    if (comma == std::string::npos)
      throw input_error(path + ": line " + std::to_string(line_no) +
                        ": expected 'index,split'");
    std::size_t idx = 0;
    try {
      idx = std::stoull(line.substr(0, comma));
    } catch (const std::exception&) {
      throw input_error(path + ": line " + std::to_string(line_no) +
                        ": bad epoch index '" + line.substr(0, comma) + "'");
    }
    const std::string tag = line.substr(comma + 1);
    if (tag == "train") {
      split.train.push_back(idx);
    } else if (tag == "test") {
      split.test.push_back(idx);
    } else {
      throw input_error(path + ": line " + std::to_string(line_no) +
                        ": split must be train or test, found '" + tag + "'");
    }
  }
  split.validate(n_rows);
  return split;
}

}  // namespace specprobe
