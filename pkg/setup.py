#!/usr/bin/env python3
"""
Sparse Sense - Adaptive and Nonlinear Sparse Sensing Benchmarks

Adaptive sparse sensing with the reweighted zero-attracting NLMF filter, OMP and BPDN
baselines, closed-form MSE bounds and a seeded Monte Carlo harness.
"""

from setuptools import setup, find_packages


# Read the README file for long description
def read_readme():
    with open("README.md", "r", encoding="utf-8") as fh:
        return fh.read()


# Runtime dependencies; test and lint tools live in extras_require["dev"]
INSTALL_REQUIRES = [
    "numpy>=1.24.0",
    "pydantic>=2.5.0",
    "click>=8.1.0",
    "rich>=13.7.0",
    "loguru>=0.7.0",
    "psutil>=5.9.0",
    "python-dotenv>=1.0.0",
]


setup(
    name="sparse-sense",
    version="0.1.0",
    author="Sparse Sense Team",
    description="Adaptive sparse sensing (RZA-NLMF) versus OMP/BPDN with Monte Carlo MSE benchmarks",
    long_description=read_readme(),
    long_description_content_type="text/markdown",
    packages=find_packages(exclude=["tests", "tests.*", "examples", "examples.*"]),
    classifiers=[
        "Development Status :: 4 - Beta",
        "Intended Audience :: Science/Research",
        "License :: OSI Approved :: MIT License",
        "Operating System :: OS Independent",
        "Programming Language :: Python :: 3",
        "Programming Language :: Python :: 3.9",
        "Programming Language :: Python :: 3.10",
        "Programming Language :: Python :: 3.11",
        "Topic :: Scientific/Engineering :: Mathematics",
        "Topic :: Scientific/Engineering :: Information Analysis",
    ],
    python_requires=">=3.9",
    install_requires=INSTALL_REQUIRES,
    extras_require={
        "dev": [
            "pytest>=7.0.0",
            "pytest-cov>=4.0.0",
            "pytest-mock>=3.12.0",
            "black>=22.0.0",
            "flake8>=5.0.0",
            "mypy>=1.0.0",
        ],
    },
    entry_points={
        "console_scripts": [
            "sparsesense=src.cli:cli",
        ],
    },
    include_package_data=True,
    keywords=[
        "compressive-sensing",
        "sparse-recovery",
        "adaptive-filtering",
        "least-mean-fourth",
        "zero-attracting",
        "orthogonal-matching-pursuit",
        "basis-pursuit-denoising",
        "monte-carlo",
        "cramer-rao-bound",
    ],
)
