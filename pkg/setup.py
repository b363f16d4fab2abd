import setuptools
from setuptools import find_packages

with open("README.md", "r") as fh:
    long_description = fh.read()

setuptools.setup(
    name="calabilab",
    version="0.1.0",
    author="Dror A. Vinkler",
    description="A numerical laboratory for the Calabi flow on compact Riemann surfaces",
    long_description=long_description,
    long_description_content_type="text/markdown",
    packages=find_packages(where="src"),
    package_dir={"": "src"},
    install_requires=[
        "attrs>=21.3",
        "more-itertools",
        "numpy>=1.22",
        "scipy>=1.8",
        "matplotlib>=3.5",
    ],
    entry_points={"console_scripts": ["calabilab = calabilab.cli:main"]},
    classifiers=[
        "Programming Language :: Python :: 3",
        "License :: OSI Approved :: MIT License",
        "Operating System :: OS Independent",
        "Topic :: Scientific/Engineering :: Mathematics",
    ],
    python_requires=">=3.8",
    license="MIT",
)
