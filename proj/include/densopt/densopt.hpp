#pragma once

#include "densopt/error.hpp"
#include "densopt/quadrature.hpp"
#include "densopt/mesh.hpp"
#include "densopt/fe.hpp"
#include "densopt/density.hpp"
#include "densopt/assembly.hpp"
#include "densopt/eigensolve.hpp"
#include "densopt/sensitivity.hpp"
#include "densopt/postprocess.hpp"
#include "densopt/optimizer.hpp"
#include "densopt/oned.hpp"
#include "densopt/io.hpp"
#include "densopt/studies.hpp"
