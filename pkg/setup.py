"""
Setup script for kerrsight
"""

from setuptools import setup, find_packages

with open("README.md", "r", encoding="utf-8") as fh:
    long_description = fh.read()

setup(
    name="kerrsight",
    version="0.1.0",
    author="kerrsight developers",
    description="Forward scattering and shape reconstruction for 2D Kerr-type nonlinear Helmholtz media",
    long_description=long_description,
    long_description_content_type="text/markdown",
    packages=find_packages(),
    classifiers=[
        "Development Status :: 3 - Alpha",
        "Intended Audience :: Science/Research",
        "Topic :: Scientific/Engineering :: Physics",
        "License :: OSI Approved :: MIT License",
        "Programming Language :: Python :: 3",
        "Programming Language :: Python :: 3.11",
        "Programming Language :: Python :: 3.12",
    ],
    python_requires=">=3.11",
    install_requires=[
        "numpy>=1.24.0",
        "scipy>=1.12.0",
        "pydantic>=2.0.0",
        "pandas>=2.0.0",
        "python-dotenv>=1.0.0",
        "pytest>=7.4.0",
        "rich>=13.6.0",
        "click>=8.1.0",
    ],
    entry_points={
        "console_scripts": [
            "kerrsight=kerrsight.cli:cli",
        ],
    },
    include_package_data=True,
    package_data={
        "kerrsight": ["data/*.json", "data/*.toml"],
    },
)
