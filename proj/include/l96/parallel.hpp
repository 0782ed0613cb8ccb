#pragma once

namespace l96 {

// Selects the serial reference kernel or its OpenMP counterpart. Both produce
// bitwise-identical results; the serial path is kept for testing.
enum class Exec { serial, parallel };

}  // namespace l96
