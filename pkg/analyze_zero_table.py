"""Summary statistics of a refined zero table: residuals, |zeta'| and extremes"""

import argparse
import sys

import mpmath
import numpy as np
import pandas as pd

from precision_core import BaezDuarteError
from zero_store import load_table, scan_derivative_extremes


def _log10(value):
    if value is None:
        return np.nan
    return float(mpmath.log10(value)) if value > 0 else -np.inf


def zero_frame(table):
    """One row per zero; float columns for statistics only, never for persistence."""
    rows = []
    for zero in table.zeros:
        zp = zero.zeta_prime
        rows.append({
            'index': zero.index,
            'gamma': float(zero.gamma),
            'precision_digits': zero.precision_digits,
            'log10_residual': _log10(zero.residual),
            'abs_zeta_prime': np.nan if zp is None else float(abs(zp)),
            'log10_re_deviation': _log10(None if zero.real_part_deviation is None
                                         else abs(zero.real_part_deviation)),
            'verified': zero.is_verified,
        })
    return pd.DataFrame(rows, columns=['index', 'gamma', 'precision_digits', 'log10_residual',
                                       'abs_zeta_prime', 'log10_re_deviation', 'verified'])


def residual_summary(table, df=None):
    df = zero_frame(table) if df is None else df
    print("\n" + "="*80)
    print("RESIDUAL SUMMARY")
    print("="*80)

    print(f"\nZeros in table: {len(df):,}")
    if df.empty:
        return None
    print(f"Verified: {int(df['verified'].sum()):,} / {len(df):,}")
    print(f"Ordinate range: {df['gamma'].min():.6f} .. {df['gamma'].max():.6f}")

    worst = max(table.zeros, key=lambda z: z.residual if z.residual is not None else -1)
    if worst.residual is not None:
        print(f"\nMax residual |zeta(rho)|: {mpmath.nstr(worst.residual, 5)} at zero {worst.index}")
    print(f"\nlog10 residual statistics:")
    print(df['log10_residual'].replace(-np.inf, np.nan).describe())
    return worst


def derivative_summary(table, l_min=1, l_max=None, df=None):
    df = zero_frame(table) if df is None else df
    print("\n" + "="*80)
    print("ZETA' SUMMARY")
    print("="*80)

    if df.empty or df['abs_zeta_prime'].isna().all():
        print("\nNo derivatives attached")
        return None

    extremes = scan_derivative_extremes(table, l_min, l_max)
    print(f"\nScanned zeros {l_min:,} .. {(l_max or table.count):,}")
    print(f"  min |zeta'(rho)| = {mpmath.nstr(extremes.min_value, 11)} at l = {extremes.min_index}")
    print(f"  max |zeta'(rho)| = {mpmath.nstr(extremes.max_value, 11)} at l = {extremes.max_index}")

    print(f"\n|zeta'| statistics:")
    print(df['abs_zeta_prime'].describe())

    # |zeta'| grows on average like log(gamma); bucket by ordinate to show it
    if len(df) >= 4:
        df = df.copy()
        df['gamma_bucket'] = pd.qcut(df['gamma'], q=min(4, len(df)), duplicates='drop')
        print(f"\nMean |zeta'| by ordinate quartile:")
        print(df.groupby('gamma_bucket', observed=True)['abs_zeta_prime'].agg(['mean', 'min', 'max', 'count']))
    return extremes


def export_zero_summary(table, output_file):
    df = zero_frame(table)
    df.to_csv(output_file, index=False)
    print(f"\n>>> Saved summary of {len(df):,} zeros to {output_file}")
    return df


def main(argv=None):
    parser = argparse.ArgumentParser(description="Summarise a persisted zero table")
    parser.add_argument('zeros_file')
    parser.add_argument('--l-min', type=int, default=1)
    parser.add_argument('--l-max', type=int, default=None)
    parser.add_argument('--output', default=None, help="optional CSV export of the per-zero summary")
    args = parser.parse_args(argv)

    try:
        print(f"Loading zero table from {args.zeros_file}...")
        table = load_table(args.zeros_file)
        print(f"Loaded {table.count:,} zeros at {table.precision_digits} digits")
        df = zero_frame(table)
        residual_summary(table, df)
        derivative_summary(table, args.l_min, args.l_max, df)
        if args.output:
            export_zero_summary(table, args.output)
    except BaezDuarteError as e:
        print(f"ERROR: {e}", file=sys.stderr)
        return 1
    return 0


if __name__ == "__main__":
    sys.exit(main())
