#pragma once

#include <filesystem>
#include <map>
#include <string>
#include <vector>

#include "lol/providers/provider.hpp"

namespace lol::providers {

inline constexpr int kReplayVersion = 1;

// On-disk layout (.lolr):
//   line 1  UTF-8 JSON {"version":1,"vocab_size":V,"n_layers":N,
//           "layers":[...],"source":"...","count":C}
//   then C records, each
//     u32 prefix length P, P x u32 token ids,
//     for each header layer in order: V x f32 raw scores
//   all integers and floats little-endian.
struct ReplayHeader {
  int version = kReplayVersion;
  int vocab_size = 0;
  int n_layers = 0;
  std::vector<LayerIndex> layers;  // strictly increasing
  std::string source;
  std::size_t count = 0;
};

struct ReplayRecord {
  TokenSequence prefix;
  std::vector<std::vector<float>> values;  // one row per header layer
};

class ReplayArchive {
 public:
  ReplayArchive() = default;
  ReplayArchive(ReplayHeader header, std::vector<ReplayRecord> records);

  static ReplayArchive parse(std::string_view bytes);
  static ReplayArchive load(const std::filesystem::path& path);
  std::string serialize() const;

  const ReplayHeader& header() const noexcept { return header_; }
  const std::vector<ReplayRecord>& records() const noexcept { return records_; }
  const ReplayRecord* find(const TokenSequence& prefix) const;

 private:
  void validate_and_index();

  ReplayHeader header_;
  std::vector<ReplayRecord> records_;
  std::map<TokenSequence, std::size_t> index_;
};

// Answers only prefixes stored in the archive, matched exactly.
class ReplayProvider final : public LogitProvider {
 public:
  explicit ReplayProvider(ReplayArchive archive);
  static std::shared_ptr<ReplayProvider> open(const std::filesystem::path& path);

  const ProviderInfo& info() const noexcept override { return info_; }
  LayeredLogits query(const TokenSequence& prefix, std::span<const LayerIndex> layers) const override;

  const ReplayArchive& archive() const noexcept { return archive_; }

 private:
  ReplayArchive archive_;
  ProviderInfo info_;
};

struct DumpSummary {
  ReplayHeader header;
  std::size_t records = 0;
  std::size_t duplicates_dropped = 0;
};

// Queries `provider` for each distinct prefix (first occurrence order) at
// the given layers (sorted, deduplicated) and builds an archive.
ReplayArchive build_replay(const LogitProvider& provider, const std::vector<TokenSequence>& prefixes,
                           std::span<const LayerIndex> layers, std::size_t* duplicates_dropped = nullptr);

// build_replay, then an atomic write to `sink`.
DumpSummary dump_replay(const LogitProvider& provider, const std::vector<TokenSequence>& prefixes,
                        std::span<const LayerIndex> layers, const std::filesystem::path& sink);

}  // namespace lol::providers
