#ifndef COLLUSION_FORMATS_H_
#define COLLUSION_FORMATS_H_

#include <functional>
#include <iosfwd>
#include <string>
#include <vector>

#include "collusion/simulation.h"

namespace collusion {

inline constexpr const char* kTraceSchema = "collusion-trace";
inline constexpr int kTraceVersion = 1;
inline constexpr int kSummaryVersion = 1;

// Decimal with 17 significant digits; strtod recovers the same double.
std::string FormatDouble(double value);

// Header line, then one JSON object per stage.
void WriteTraceJsonl(std::ostream& out, const Trace& trace);
Trace ReadTraceJsonl(std::istream& in);

// Header row plus one data row. Delta columns are empty when the run has no
// benchmarks.
void WriteSummaryCsv(std::ostream& out, const MetricsSummary& summary);
MetricsSummary ReadSummaryCsv(std::istream& in);

// checkpoint, regret_0, ..., regret_{n-1}; all series share checkpoints.
void WriteRegretCsv(std::ostream& out, const std::vector<RegretSeries>& series);

// probe_stage, action_i..., price_i...; stage 0 is the pre-deviation profile.
void WriteProbeCsv(std::ostream& out, const ProbeResult& probe);

// File helpers. Writes go to a sibling temporary and are renamed into
// place, so a present file is always complete.
void WriteFileAtomic(const std::string& path,
                     const std::function<void(std::ostream&)>& write);
void WriteFileAtomic(const std::string& path, const std::string& contents);
std::string ReadFile(const std::string& path);

}  // namespace collusion

#endif  // COLLUSION_FORMATS_H_
