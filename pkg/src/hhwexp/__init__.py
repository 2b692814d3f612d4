"""Vol-of-vol expansion pricing of FX puts under Heston-Hull-White dynamics."""
from .black_scholes import BsPoint, bs_partial, bs_put, bs_put_price, implied_vol
from .expansion import (delta_stochastic_rates, price_heston_exp, price_hhw_exp,
                        price_hybrid_expchf)
from .heston_chf import ChfParams, charfn, price_heston_chf, price_put_chf
from .integrals import I1, I1_2k, I2, I3, I4, ExpCoeffs, alpha_coeffs, y0_hhw
from .mc_qe import McConfig, McEstimate, simulate_heston, simulate_hhw, simulate_hhw_strikes
from .model import (CorrMatrix, HestonParams, HullWhiteParams, ModelParams, OptionSpec,
                    PriceResult, ZeroCurve, base_params, load_params, make_option, validate)

__version__ = "0.1.0"
