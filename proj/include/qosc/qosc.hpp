#pragma once

#include "qosc/error.hpp"
#include "qosc/ontology.hpp"
#include "qosc/model.hpp"
#include "qosc/repository.hpp"
#include "qosc/service_space.hpp"
#include "qosc/composition.hpp"
#include "qosc/abstraction.hpp"
#include "qosc/refinement.hpp"
#include "qosc/datagen.hpp"
#include "qosc/bench.hpp"
