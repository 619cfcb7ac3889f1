#include "lol/providers/replay.hpp"

#include <algorithm>
#include <cmath>
#include <set>

#include <json.hpp>

#include "../binary_io.hpp"
#include "lol/atomic_file.hpp"
#include "lol/error.hpp"

namespace lol::providers {

using nlohmann::ordered_json;

ReplayArchive::ReplayArchive(ReplayHeader header, std::vector<ReplayRecord> records)
    : header_(std::move(header)), records_(std::move(records)) {
  header_.count = records_.size();
  validate_and_index();
}

void ReplayArchive::validate_and_index() {
  const auto& h = header_;
  if (h.version != kReplayVersion) {
    throw IoError("unsupported replay version " + std::to_string(h.version));
  }
  if (h.vocab_size <= 0 || h.n_layers <= 0) throw IoError("replay header has non-positive dimensions");
  if (h.layers.empty()) throw IoError("replay header lists no layers");
  for (std::size_t i = 0; i < h.layers.size(); ++i) {
    if (h.layers[i] < 1 || h.layers[i] > h.n_layers) {
      throw IoError("replay header layer " + std::to_string(h.layers[i]) + " outside [1, n_layers]");
    }
    if (i > 0 && h.layers[i] <= h.layers[i - 1]) {
      throw IoError("replay header layers must be strictly increasing");
    }
  }
  if (h.count != records_.size()) throw IoError("replay header count disagrees with records");
  index_.clear();
  for (std::size_t i = 0; i < records_.size(); ++i) {
    const auto& r = records_[i];
    if (r.prefix.empty()) throw IoError("replay record " + std::to_string(i) + " has an empty prefix");
    if (r.values.size() != h.layers.size()) {
      throw IoError("replay record " + std::to_string(i) + " has the wrong number of layers");
    }
    for (const auto& row : r.values) {
      if (row.size() != static_cast<std::size_t>(h.vocab_size)) {
        throw IoError("replay record " + std::to_string(i) + " has a row of the wrong length");
      }
      if (!std::all_of(row.begin(), row.end(), [](float v) { return std::isfinite(v); })) {
        throw IoError("replay record " + std::to_string(i) + " holds non-finite scores");
      }
    }
    if (!index_.emplace(r.prefix, i).second) {
      throw IoError("duplicate replay prefix " + format_tokens(r.prefix));
    }
  }
}

const ReplayRecord* ReplayArchive::find(const TokenSequence& prefix) const {
  auto it = index_.find(prefix);
  return it == index_.end() ? nullptr : &records_[it->second];
}

std::string ReplayArchive::serialize() const {
  ordered_json j;
  j["version"] = header_.version;
  j["vocab_size"] = header_.vocab_size;
  j["n_layers"] = header_.n_layers;
  j["layers"] = header_.layers;
  j["source"] = header_.source;
  j["count"] = records_.size();
  std::string out = j.dump();
  out += '\n';
  for (const auto& r : records_) {
    binary::put_u32(out, static_cast<std::uint32_t>(r.prefix.size()));
    for (TokenId t : r.prefix) binary::put_u32(out, t);
    for (const auto& row : r.values) {
      for (float v : row) binary::put_f32(out, v);
    }
  }
  return out;
}

ReplayArchive ReplayArchive::parse(std::string_view bytes) {
  const auto nl = binary::header_end(bytes);
  ReplayHeader h;
  try {
    auto j = ordered_json::parse(bytes.substr(0, nl));
    h.version = j.at("version").get<int>();
    h.vocab_size = j.at("vocab_size").get<int>();
    h.n_layers = j.at("n_layers").get<int>();
    h.layers = j.at("layers").get<std::vector<LayerIndex>>();
    h.source = j.at("source").get<std::string>();
    h.count = j.at("count").get<std::size_t>();
  } catch (const nlohmann::json::exception& e) {
    throw IoError(std::string("malformed replay header: ") + e.what());
  }
  if (h.version != kReplayVersion) throw IoError("unsupported replay version " + std::to_string(h.version));
  if (h.vocab_size <= 0) throw IoError("replay header has non-positive vocab_size");

  binary::Reader reader(bytes, nl + 1);
  std::vector<ReplayRecord> records;
  records.reserve(h.count);
  for (std::size_t i = 0; i < h.count; ++i) {
    ReplayRecord r;
    const std::uint32_t len = reader.u32();
    if (static_cast<std::size_t>(len) * 4 > reader.remaining()) throw IoError("truncated replay record");
    r.prefix.resize(len);
    for (auto& t : r.prefix) t = reader.u32();
    r.values.resize(h.layers.size());
    for (auto& row : r.values) {
      row.resize(static_cast<std::size_t>(h.vocab_size));
      for (auto& v : row) v = reader.f32();
    }
    records.push_back(std::move(r));
  }
  if (reader.remaining() != 0) throw IoError("trailing bytes after the last replay record");
  return ReplayArchive(std::move(h), std::move(records));
}

ReplayArchive ReplayArchive::load(const std::filesystem::path& path) {
  return parse(read_file(path));
}

ReplayProvider::ReplayProvider(ReplayArchive archive) : archive_(std::move(archive)) {
  const auto& h = archive_.header();
  info_.identity = h.source;
  info_.vocab_size = h.vocab_size;
  info_.n_layers = h.n_layers;
  info_.arbitrary_prefixes = false;
  info_.max_context = 0;
}

std::shared_ptr<ReplayProvider> ReplayProvider::open(const std::filesystem::path& path) {
  return std::make_shared<ReplayProvider>(ReplayArchive::load(path));
}

LayeredLogits ReplayProvider::query(const TokenSequence& prefix,
                                    std::span<const LayerIndex> layers) const {
  validate_layers(info_, layers);
  const auto* record = archive_.find(prefix);
  if (!record) throw PrefixNotFoundError(prefix);
  const auto& header_layers = archive_.header().layers;
  LayeredLogits out;
  for (LayerIndex l : layers) {
    auto it = std::find(header_layers.begin(), header_layers.end(), l);
    if (it == header_layers.end()) throw LayerNotDumpedError(l);
    const auto& row = record->values[static_cast<std::size_t>(it - header_layers.begin())];
    out.emplace(l, std::vector<double>(row.begin(), row.end()));
  }
  return out;
}

ReplayArchive build_replay(const LogitProvider& provider, const std::vector<TokenSequence>& prefixes,
                           std::span<const LayerIndex> layers, std::size_t* duplicates_dropped) {
  if (layers.empty()) throw ValidationError("dump needs a non-empty layer set");
  if (prefixes.empty()) throw ValidationError("dump needs at least one prefix");
  validate_layers(provider.info(), layers);

  ReplayHeader header;
  header.vocab_size = provider.vocab_size();
  header.n_layers = provider.n_layers();
  header.layers.assign(layers.begin(), layers.end());
  std::sort(header.layers.begin(), header.layers.end());
  header.layers.erase(std::unique(header.layers.begin(), header.layers.end()), header.layers.end());
  header.source = provider.identity();

  std::set<TokenSequence> seen;
  std::vector<ReplayRecord> records;
  std::size_t dups = 0;
  for (const auto& prefix : prefixes) {
    if (!seen.insert(prefix).second) {
      ++dups;
      continue;
    }
    const auto logits = provider.query(prefix, header.layers);
    ReplayRecord r;
    r.prefix = prefix;
    for (LayerIndex l : header.layers) {
      const auto& row = logits.at(l);
      r.values.emplace_back(row.begin(), row.end());
    }
    records.push_back(std::move(r));
  }
  if (duplicates_dropped) *duplicates_dropped = dups;
  return ReplayArchive(std::move(header), std::move(records));
}

DumpSummary dump_replay(const LogitProvider& provider, const std::vector<TokenSequence>& prefixes,
                        std::span<const LayerIndex> layers, const std::filesystem::path& sink) {
  DumpSummary summary;
  const auto archive = build_replay(provider, prefixes, layers, &summary.duplicates_dropped);
  write_file_atomic(sink, archive.serialize());
  summary.header = archive.header();
  summary.records = archive.records().size();
  return summary;
}

}  // namespace lol::providers
