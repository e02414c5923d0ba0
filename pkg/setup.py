#!/usr/bin/env python3
"""
Setup configuration for the steklov-limits package.
"""

from setuptools import setup, find_packages
from pathlib import Path

# Read the README file
this_directory = Path(__file__).parent
long_description = (this_directory / "README.md").read_text(encoding='utf-8')

# Read requirements
requirements = (this_directory / "requirements.txt").read_text().strip().split('\n')
requirements = [req.strip() for req in requirements if req.strip() and not req.startswith('#')]

setup(
    name="steklov-limits",
    version="1.0.0",
    author="Your Organization",
    author_email="support@yourorg.com",
    description="Steklov eigenvalues as limits of Neumann eigenvalues with boundary-concentrated mass",
    long_description=long_description,
    long_description_content_type="text/markdown",

    # Package configuration
    packages=find_packages(exclude=["tests", "tests.*", "examples", "examples.*"]),
    include_package_data=True,
    zip_safe=False,

    # Python version requirement
    python_requires=">=3.9",

    # Dependencies
    install_requires=requirements,

    # Optional dependencies
    extras_require={
        "dev": [
            # Testing
            "pytest>=7.4.0",
            "pytest-cov>=4.1.0",
            "pytest-xdist>=3.3.0",
            "mpmath>=1.3.0",
            # Code quality
            "black>=23.7.0",
            "flake8>=6.0.0",
            "mypy>=1.5.0",
            "isort>=5.12.0",
        ],
        "test": [
            "pytest>=7.4.0",
            "pytest-cov>=4.1.0",
            "pytest-xdist>=3.3.0",
            "mpmath>=1.3.0",
        ],
    },

    # Console scripts
    entry_points={
        "console_scripts": [
            "steklov-limits=steklov_limits.main:main",
        ],
    },

    # Package metadata
    classifiers=[
        "Development Status :: 4 - Beta",
        "Intended Audience :: Science/Research",
        "License :: OSI Approved :: MIT License",
        "Operating System :: OS Independent",
        "Programming Language :: Python :: 3",
        "Programming Language :: Python :: 3.9",
        "Programming Language :: Python :: 3.10",
        "Programming Language :: Python :: 3.11",
        "Programming Language :: Python :: 3.12",
        "Topic :: Scientific/Engineering :: Mathematics",
    ],

    keywords="steklov neumann eigenvalues bessel finite-elements spectral-geometry",

    # Data files
    package_data={
        "steklov_limits": [
            "result_schema.json",
        ],
    },

    platforms=["any"],
    license="MIT",
    test_suite="tests",
)
