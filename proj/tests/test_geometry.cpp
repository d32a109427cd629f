#include "wavespec/spectrum.hpp"
#include "wavespec/model.hpp"
#include <catch2/catch_amalgamated.hpp>
