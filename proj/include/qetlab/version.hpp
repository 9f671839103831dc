#pragma once

namespace qetlab {

inline constexpr const char* kLibraryVersion = "0.1.0";
inline constexpr int kRecordSchemaVersion = 1;

} // namespace qetlab
