from setuptools import setup, find_packages

setup(
    name="common_utils",
    version="0.2.0",
    packages=find_packages(),
    install_requires=[
        "jinja2>=3.1.2",
    ],
    description="Shared logging, error and report utilities for the LDPC construction toolkit",
)
