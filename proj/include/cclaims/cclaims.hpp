#pragma once
// Umbrella header: the whole toolkit except the HTTP backends, which pull
// in cpp-httplib and are opt-in via cclaims/http_backend.hpp.

#include "cclaims/annotate.hpp"
#include "cclaims/conformal.hpp"
#include "cclaims/corpus.hpp"
#include "cclaims/errors.hpp"
#include "cclaims/pipeline.hpp"
#include "cclaims/similarity.hpp"
#include "cclaims/synth.hpp"
